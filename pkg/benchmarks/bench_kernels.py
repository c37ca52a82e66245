"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py``; prints one line per kernel with
the best-of-``--repeat`` wall time of each backend and the speedup.
"""
import argparse
import time

import numpy as np

from cooperbound import _kernels
from cooperbound._kernels import python as py
from cooperbound.ensemble import _FastGauge
from cooperbound.gauge import GaugeCouplings
from cooperbound.lattice import LatticeSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_hopping_entries(mod):
    def run():
        for a in range(8):
            mod.hopping_entries(4 ** 6, a, (a + 3) % 12)
    return run


def bench_fill_hopping(mod, rng):
    n_entries, n_bonds, size = 20000, 8, 4096
    fwd = rng.integers(0, size, n_entries)
    bwd = rng.integers(0, size, n_entries)
    bond = rng.integers(0, n_bonds, n_entries)
    amp = rng.normal(size=n_entries) + 0j
    a = rng.uniform(-np.pi, np.pi, n_bonds)
    ef, eb = np.exp(1j * a), np.exp(-1j * a)

    def run():
        out = np.zeros(size, dtype=complex)
        for _ in range(20):
            mod.fill_hopping(out, fwd, bwd, bond, amp, ef, eb)
    return run


def bench_gauge_sweep(mod, rng, shape=(6, 6, 6), sweeps=20):
    lat = LatticeSpec.box(shape)
    fg = _FastGauge(lat, GaugeCouplings(kappa=1.0, alpha=0.5, beta=1.0))
    x0 = rng.uniform(-np.pi, np.pi, lat.n_bonds)
    draws = [(rng.uniform(-1, 1, lat.n_bonds), rng.random(lat.n_bonds)) for _ in range(sweeps)]

    def run():
        x = x0.copy()
        div, flux = lat.div(x), fg.fluxes(x)
        for shifts, uniforms in draws:
            mod.gauge_sweep(x, div, flux, fg.bond_sites, fg.ptr, fg.idx, fg.sign, shifts, uniforms,
                            fg.beta_kappa, fg.beta_over_alpha)
    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled backend not built; only the Python timings are shown")
    mods = [("python", py)] + ([("cython", _kernels.compiled)] if _kernels.compiled is not None else [])
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in mods) + f"{'speedup':>10}")
    for label, make in (("hopping_entries", lambda m, r: bench_hopping_entries(m)),
                        ("fill_hopping", bench_fill_hopping),
                        ("gauge_sweep", bench_gauge_sweep)):
        times = [best_of(make(mod, np.random.default_rng(0)), args.repeat) for _, mod in mods]
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<18}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
