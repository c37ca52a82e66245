"""Gauge-ensemble expectations: exact periodic quadrature and Metropolis MC.

The expectation of a fermionic observable ``O`` is

    <O> = int dA e^{-beta E_g(A)} Tr[O e^{-beta (H(A) - mu N)}] / Z

with ``A`` ranging over ``[-pi, pi]`` per bond.  The marginal weight of a
gauge configuration is ``e^{-S(A)}`` with effective action
``S(A) = beta E_g(A) - log Tr e^{-beta (H(A) - mu N)}``, which is real, so
there is no sign problem.

Quadrature uses the periodic trapezoid rule with nodes ``2 pi j / n``.
Because ``H(A + d chi) = G(chi) H(A) G(chi)^+``, the fermionic trace only
needs to be evaluated once per class of configurations related by a
gauge transformation; for observables of definite charge the sum over the
tree part of the grid is done analytically in the phase.  The result is the
same discrete sum as brute-force enumeration (``method="brute"``).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .fock import DEFAULT_DIM_CAP, FermionModel, FermionSystem
from .gauge import GaugeConfig, GaugeCouplings, gauge_energy, wrap_angle
from .lattice import LatticeSpec

__all__ = [
    "QuadratureError",
    "SamplerSettings",
    "EnsembleSpec",
    "MCEstimate",
    "Ensemble",
    "effective_action",
    "exact_expectation",
    "run_mc",
]

MAX_QUAD_BONDS = 6


class QuadratureError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SamplerSettings:
    delta: float = math.pi / 2
    sweeps: int = 1000
    thermalization: int = 200
    chains: int = 4
    tune: bool = True
    target_acceptance: float = 0.4
    bins: int = 32

    def __post_init__(self):
        if not 0 < self.delta <= math.pi:
            raise ValueError(f"proposal width must be in (0, pi], got {self.delta}")
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.thermalization < 0 or self.chains < 1:
            raise ValueError("thermalization must be >= 0 and chains >= 1")


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    lattice: LatticeSpec
    model: FermionModel
    couplings: GaugeCouplings
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    quad_nodes: int = 32
    quad_tol: float = 1e-8
    quad_atol: float = 1e-14

    def __post_init__(self):
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be >= 2")


@dataclass
class MCEstimate:
    name: str
    mean: float
    stderr: float
    tau_int: float
    proposals: int
    acceptance: float
    chains: int
    seed: int
    imag_mean: float = 0.0
    delta: float = 0.0
    chain_means: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _spanning_tree(lattice: LatticeSpec) -> np.ndarray:
    """Boolean mask of tree bonds (breadth-first from site 0)."""
    adj = [[] for _ in range(lattice.n_sites)]
    for b, (i, j, _) in enumerate(lattice.bonds):
        adj[i].append((j, b))
        adj[j].append((i, b))
    seen = {0}
    tree = np.zeros(lattice.n_bonds, dtype=bool)
    queue = [0]
    while queue:
        nxt = []
        for s in queue:
            for t, b in adj[s]:
                if t not in seen:
                    seen.add(t)
                    tree[b] = True
                    nxt.append(t)
        queue = nxt
    return tree


def _charge(space_density: np.ndarray, op) -> np.ndarray | None:
    """Site charges ``q`` with ``[n_x, O] = q_x O``, or None if not uniform."""
    coo = sp.coo_matrix(op)
    if coo.nnz == 0:
        return np.zeros(space_density.shape[1])
    dq = space_density[coo.row] - space_density[coo.col]
    if np.any(dq != dq[0]):
        return None
    return dq[0]


class Ensemble:
    """Evaluator bound to one :class:`EnsembleSpec`."""

    def __init__(self, spec: EnsembleSpec, cap: int = DEFAULT_DIM_CAP):
        self.spec = spec
        self.lattice = spec.lattice
        self.system = FermionSystem(spec.lattice, spec.model, cap)
        self.beta = spec.couplings.beta
        self.frozen = spec.couplings.flux_frozen
        self.has_hopping = spec.model.has_hopping
        grad = self.lattice.incidence
        # variables -> bond angles; flux-frozen mode uses site angles with site 0 pinned
        self.var_map = grad[:, 1:] if self.frozen else None
        self._free_log_trace = None

    # -- actions ------------------------------------------------------------
    def angles(self, variables) -> np.ndarray:
        v = np.asarray(variables, dtype=float)
        return v @ self.var_map.T if self.frozen else v

    def n_vars(self) -> int:
        return self.lattice.n_sites - 1 if self.frozen else self.lattice.n_bonds

    def gauge_energy(self, angles) -> np.ndarray:
        return gauge_energy(angles, self.spec.couplings, self.lattice)

    def log_trace(self, angles) -> float:
        if not self.has_hopping:
            # the Hamiltonian does not depend on the gauge field
            if self._free_log_trace is None:
                self._free_log_trace = self.system.log_trace(np.zeros(self.lattice.n_bonds), self.beta)
            return self._free_log_trace
        return self.system.log_trace(angles, self.beta)

    def effective_action(self, A) -> float:
        a = A.angles if isinstance(A, GaugeConfig) else np.asarray(A, dtype=float)
        return float(self.beta * self.gauge_energy(a) - self.log_trace(a))

    def _fermion_values(self, angles, obs_blocks):
        return self.system.thermal(self.system.eig(angles), self.beta, obs_blocks)

    # -- exact quadrature -------------------------------------------------------
    def exact_expectation(self, observable=None, method: str = "auto") -> complex:
        """Periodic-trapezoid evaluation with an internal nested-grid convergence check.

        The sum is taken on ``2 n`` nodes per variable, ``n = quad_nodes``.  The
        ``n``-node grid is the even subgrid, so its result comes for free; the
        two must agree within ``quad_tol`` (relative) or ``quad_atol``
        (absolute), otherwise a :class:`QuadratureError` is raised.  The
        ``2 n``-node value is returned.
        """
        if observable is None:
            return 1.0 + 0.0j
        if not self.frozen and self.lattice.n_bonds > MAX_QUAD_BONDS:
            raise QuadratureError(f"exact quadrature limited to {MAX_QUAD_BONDS} bonds")
        if _is_gauge_observable(observable):
            return self._check(*self._brute(None, observable))
        q = _charge(self.system.space.site_density, observable)
        if method == "auto":
            method = "reduced" if q is not None else "brute"
        if method == "reduced" and q is None:
            raise ValueError("reduced quadrature needs an observable of definite charge")
        obs = self.system.observable_blocks(observable)
        return self._check(*(self._reduced(obs, q) if method == "reduced" else self._brute(obs)))

    def _check(self, fine, coarse):
        diff = abs(fine - coarse)
        if diff > max(self.spec.quad_tol * abs(fine), self.spec.quad_atol):
            raise QuadratureError(
                "trapezoid rule not converged",
                {"nodes": self.spec.quad_nodes, "fine": fine, "coarse": coarse, "diff": diff})
        return fine

    def _nodes(self):
        n = 2 * self.spec.quad_nodes
        return 2 * np.pi * np.arange(n) / n

    def _reduced(self, obs, q):
        n = 2 * self.spec.quad_nodes
        nodes = self._nodes()
        lat = self.lattice
        if self.frozen:
            tree = np.zeros(lat.n_bonds, dtype=bool)
            cycle_bonds = np.zeros(0, dtype=np.int64)
        else:
            tree = _spanning_tree(lat)
            cycle_bonds = np.flatnonzero(~tree)
        grad = lat.incidence[:, 1:]          # d chi with chi_0 = 0
        q_free = q[1:]
        ns = lat.n_sites - 1
        acc = _LogAccumulator(2)
        chi_idx = np.stack(np.meshgrid(*([np.arange(n)] * ns), indexing="ij"), -1).reshape(-1, ns)
        chunk = max(1, (1 << 20) // max(1, lat.n_bonds))
        for cyc in itertools.product(range(n), repeat=len(cycle_bonds)):
            base = np.zeros(lat.n_bonds)
            base[cycle_bonds] = nodes[list(cyc)]
            logz, (val,) = self._fermion_values(base, [obs])
            cyc_even = all(c % 2 == 0 for c in cyc)
            for s in range(0, len(chi_idx), chunk):
                ci = chi_idx[s:s + chunk]
                chi = nodes[ci]
                A = base + chi @ grad.T
                logw = -self.beta * self.gauge_energy(A) + logz
                vals = np.exp(-1j * (chi @ q_free)) * val
                even = np.all(ci % 2 == 0, axis=1) & cyc_even
                acc.add(logw, vals, even)
        return acc.result()

    def _brute(self, obs, func=None):
        n = 2 * self.spec.quad_nodes
        nodes = self._nodes()
        nv = self.n_vars()
        acc = _LogAccumulator(2)
        if func is not None and not self.has_hopping:
            # fermionic weight is constant: evaluate the whole grid in vectorized chunks
            if n ** nv > 1 << 26:
                raise QuadratureError(f"grid of {n}^{nv} points is too large")
            logz = self.log_trace(None)
            lead = min(nv, 2)
            if nv > lead:
                rest = np.stack(np.meshgrid(*([np.arange(n)] * (nv - lead)), indexing="ij"), -1).reshape(-1, nv - lead)
            else:
                rest = np.zeros((1, 0), dtype=np.int64)
            for head in itertools.product(range(n), repeat=lead):
                idx = np.hstack([np.broadcast_to(head, (len(rest), lead)), rest])
                A = self.angles(nodes[idx])
                logw = -self.beta * self.gauge_energy(A) + logz
                acc.add(logw, np.asarray(func(A)), np.all(idx % 2 == 0, axis=1))
            return acc.result()
        if n ** nv > 1 << 17:
            raise QuadratureError(f"brute-force grid of {n}^{nv} points is too large")
        for idx in itertools.product(range(n), repeat=nv):
            A = self.angles(nodes[list(idx)])
            if func is None:
                logz, (val,) = self._fermion_values(A, [obs])
            else:
                logz, val = self.log_trace(A), func(A)
            logw = -self.beta * self.gauge_energy(A) + logz
            acc.add(np.array([logw]), np.array([val]), np.array([all(i % 2 == 0 for i in idx)]))
        return acc.result()

    # -- Monte Carlo ------------------------------------------------------------
    def run_mc(self, observables: Mapping[str, object], seed: int,
               chain_keys=None) -> dict[str, MCEstimate]:
        """Metropolis sampling of ``e^{-S(A)}`` with single-variable proposals.

        Observables are fermionic operators (measured as the exact fermionic
        expectation at the sampled gauge field) or callables of the bond
        angles.  Each chain draws from its own counter-based Philox stream
        keyed by ``(seed, chain_key)``; pooled results are folded in sorted
        key order.
        """
        st = self.spec.sampler
        keys = tuple(range(st.chains)) if chain_keys is None else tuple(chain_keys)
        ops, funcs = {}, {}
        for name, o in observables.items():
            if _is_gauge_observable(o):
                funcs[name] = o
            else:
                ops[name] = self.system.observable_blocks(o)
        results = {k: self._chain(k, seed, ops, funcs) for k in keys}
        estimates = {}
        for name in list(ops) + list(funcs):
            series = [results[k]["series"][name] for k in sorted(keys)]
            est = _pool(name, series, st.bins)
            acc = sum(results[k]["accepted"] for k in keys)
            props = sum(results[k]["proposals"] for k in keys)
            est.proposals = props
            est.acceptance = acc / props
            est.chains = len(keys)
            est.seed = seed
            est.delta = float(np.mean([results[k]["delta"] for k in sorted(keys)]))
            est.chain_means = [float(np.mean(results[k]["series"][name].real)) for k in keys]
            if est.acceptance < 0.01:
                est.warnings.append(f"acceptance rate {est.acceptance:.4f} below 1%")
            estimates[name] = est
        return estimates

    def _chain(self, key, seed, ops, funcs):
        st = self.spec.sampler
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))
        nv = self.n_vars()
        x = np.zeros(nv)
        delta = st.delta
        fast = not self.has_hopping and not self.frozen
        series = {name: np.empty(st.sweeps, dtype=complex) for name in list(ops) + list(funcs)}
        accepted = proposals = 0
        if fast:
            lat = self.lattice
            kern = _FastGauge(lat, self.spec.couplings)
            div = lat.div(x)
            flux = kern.fluxes(x)
        else:
            A = self.angles(x)
            S = self.effective_action(A)
        for sweep in range(st.thermalization + st.sweeps):
            shifts = rng.uniform(-delta, delta, nv)
            uniforms = rng.random(nv)
            if fast:
                acc = kern.sweep(x, div, flux, shifts, uniforms)
            else:
                acc = 0
                for v in range(nv):
                    old = x[v]
                    x[v] = wrap_angle(old + shifts[v])
                    A_new = self.angles(x)
                    S_new = self.effective_action(A_new)
                    dS = S_new - S
                    if dS <= 0 or uniforms[v] < math.exp(-dS):
                        S = S_new
                        acc += 1
                    else:
                        x[v] = old
            if sweep < st.thermalization:
                if st.tune:
                    rate = acc / nv
                    delta = float(min(math.pi, max(1e-3, delta * math.exp(rate - st.target_acceptance))))
                continue
            accepted += acc
            proposals += nv
            m = sweep - st.thermalization
            A = self.angles(x)
            if ops:
                _, vals = self._fermion_values(A, list(ops.values()))
                for name, val in zip(ops, vals):
                    series[name][m] = val
            for name, f in funcs.items():
                series[name][m] = f(A)
        return {"series": series, "accepted": accepted, "proposals": proposals, "delta": delta}


class _FastGauge:
    """Pure-gauge Metropolis sweeps through the compiled kernel."""

    def __init__(self, lattice: LatticeSpec, couplings: GaugeCouplings):
        self.lattice = lattice
        P = lattice.plaquettes
        self.bond_sites = np.ascontiguousarray(lattice.bonds[:, :2])
        members = [[] for _ in range(lattice.n_bonds)]
        for p, (b1, b2, b3, b4) in enumerate(P):
            members[b1].append((p, 1.0)); members[b2].append((p, 1.0))
            members[b3].append((p, -1.0)); members[b4].append((p, -1.0))
        self.ptr = np.cumsum([0] + [len(m) for m in members]).astype(np.int64)
        self.idx = np.array([p for m in members for p, _ in m], dtype=np.int64)
        self.sign = np.array([s for m in members for _, s in m], dtype=float)
        self.beta_kappa = couplings.beta * couplings.kappa
        self.beta_over_alpha = couplings.beta / couplings.alpha

    def fluxes(self, x):
        from .gauge import fluxes
        return fluxes(self.lattice, x) if len(self.lattice.plaquettes) else np.zeros(0)

    def sweep(self, x, div, flux, shifts, uniforms):
        return _kernels.gauge_sweep(x, div, flux, self.bond_sites, self.ptr, self.idx, self.sign,
                                    shifts, uniforms, self.beta_kappa, self.beta_over_alpha)


class _LogAccumulator:
    """Running ``sum w`` and ``sum w * val`` over log weights, fine and coarse grids."""

    def __init__(self, n):
        self.shift = -np.inf
        self.z = np.zeros(n)
        self.s = np.zeros(n, dtype=complex)

    def add(self, logw, vals, coarse_mask):
        m = float(np.max(logw))
        if m > self.shift:
            scale = math.exp(self.shift - m) if np.isfinite(self.shift) else 0.0
            self.z *= scale
            self.s *= scale
            self.shift = m
        w = np.exp(logw - self.shift)
        self.z[0] += w.sum()
        self.s[0] += (w * vals).sum()
        self.z[1] += w[coarse_mask].sum()
        self.s[1] += (w * vals)[coarse_mask].sum()

    def result(self):
        return complex(self.s[0] / self.z[0]), complex(self.s[1] / self.z[1])


def _is_gauge_observable(o) -> bool:
    return callable(o) and not sp.issparse(o) and not isinstance(o, np.ndarray)


def _tau_int(x: np.ndarray, c: float = 6.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = float(np.dot(x, x) / n)
    if var == 0 or n < 4:
        return 0.5
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return float(max(tau, 0.5))


def _pool(name, series, n_bins) -> MCEstimate:
    """Pooled mean and jackknife error over equal-size bins of every chain."""
    real = [s.real for s in series]
    total = 0.0
    for s in real:
        total += s.sum()
    count = sum(len(s) for s in real)
    mean = total / count
    imag = float(sum(s.imag.sum() for s in series) / count)
    bins = []
    for s in real:
        nb = min(n_bins, len(s))
        size = len(s) // nb
        bins.extend(s[: nb * size].reshape(nb, size).mean(axis=1))
    bins = np.array(bins)
    k = len(bins)
    if k > 1:
        jk = (bins.sum() - bins) / (k - 1)
        stderr = float(np.sqrt((k - 1) / k * np.sum((jk - jk.mean()) ** 2)))
    else:
        stderr = float("nan")
    tau = float(np.mean([_tau_int(s) for s in real]))
    est = MCEstimate(name, float(mean), stderr, tau, 0, 0.0, len(series), 0, imag_mean=imag)
    size = min(len(s) for s in real) // max(1, min(n_bins, min(len(s) for s in real)))
    if size < 10 * tau:
        est.warnings.append(f"bin size {size} is small compared to tau_int {tau:.1f}")
    return est


# -- functional API -----------------------------------------------------------------

def effective_action(spec: EnsembleSpec, A) -> float:
    return Ensemble(spec).effective_action(A)


def exact_expectation(spec: EnsembleSpec, observable=None, method: str = "auto") -> complex:
    return Ensemble(spec).exact_expectation(observable, method)


def run_mc(spec: EnsembleSpec, observables: Mapping[str, object], seed: int,
           chain_keys=None) -> dict[str, MCEstimate]:
    return Ensemble(spec).run_mc(observables, seed, chain_keys)
