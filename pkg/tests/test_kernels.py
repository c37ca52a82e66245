"""Compiled kernels agree with the Python reference implementations."""
import numpy as np
import pytest

from cooperbound import _kernels
from cooperbound._kernels import python as py
from cooperbound.ensemble import _FastGauge
from cooperbound.gauge import GaugeCouplings, fluxes
from cooperbound.lattice import LatticeSpec

compiled = _kernels.compiled
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("python", "cython")


def _dense_hop(dim, a, b):
    # bit-by-bit oracle: apply c_b then c_a^dagger to each basis state
    M = np.zeros((dim, dim))
    for s in range(dim):
        if not s >> b & 1:
            continue
        sign = (-1) ** bin(s & ((1 << b) - 1)).count("1")
        t = s ^ (1 << b)
        if t >> a & 1:
            continue
        sign *= (-1) ** bin(t & ((1 << a) - 1)).count("1")
        M[t | (1 << a), s] += sign
    return M


@pytest.mark.parametrize("a,b", [(0, 0), (0, 3), (3, 0), (2, 5), (5, 1)])
def test_python_hopping_matches_bit_oracle(a, b):
    dim = 64
    rows, cols, signs = py.hopping_entries(dim, a, b)
    M = np.zeros((dim, dim))
    M[rows, cols] = signs
    assert np.array_equal(M, _dense_hop(dim, a, b))


@needs_ext
@pytest.mark.parametrize("a,b", [(0, 0), (1, 6), (7, 2), (4, 4)])
def test_hopping_entries_backends_equal(a, b):
    for x, y in zip(py.hopping_entries(256, a, b), compiled.hopping_entries(256, a, b)):
        assert np.array_equal(np.asarray(x), np.asarray(y))


@needs_ext
def test_fill_hopping_backends_equal(rng):
    n, m, nb = 200, 500, 7
    fwd, bwd = rng.integers(0, n, m), rng.integers(0, n, m)
    bond = rng.integers(0, nb, m)
    amp = rng.normal(size=m) + 1j * rng.normal(size=m)
    a = rng.normal(size=nb)
    outs = []
    for mod in (py, compiled):
        out = np.zeros(n, dtype=complex)
        mod.fill_hopping(out, fwd, bwd, bond, amp, np.exp(1j * a), np.exp(-1j * a))
        outs.append(out)
    assert np.allclose(outs[0], outs[1], atol=1e-13)


@needs_ext
@pytest.mark.parametrize("shape", [(3, 3), (2, 2, 2), (5,)])
def test_gauge_sweep_backends_equal(shape, rng):
    lat = LatticeSpec.box(shape)
    fg = _FastGauge(lat, GaugeCouplings(kappa=1.2, alpha=0.7, beta=1.5))
    x0 = rng.uniform(-np.pi, np.pi, lat.n_bonds)
    states = []
    for mod in (py, compiled):
        x = x0.copy()
        div, flux = lat.div(x), fg.fluxes(x)
        r = np.random.default_rng(7)
        acc = 0
        for _ in range(30):
            acc += mod.gauge_sweep(x, div, flux, fg.bond_sites, fg.ptr, fg.idx, fg.sign,
                                   r.uniform(-2, 2, lat.n_bonds), r.random(lat.n_bonds),
                                   fg.beta_kappa, fg.beta_over_alpha)
        states.append((x, div, flux, acc))
    (x1, d1, f1, a1), (x2, d2, f2, a2) = states
    assert a1 == a2
    assert np.allclose(x1, x2, atol=1e-12)
    # tracked divergences and fluxes stay consistent with the angles
    assert np.allclose(d2, lat.div(x2), atol=1e-9)
    if len(lat.plaquettes):
        assert np.allclose(f2, fluxes(lat, x2), atol=1e-9)


def test_environment_forces_python_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, COOPERBOUND_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cooperbound import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
