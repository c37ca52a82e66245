"""Numerical verification of the inequalities and identities behind the bounds.

Each check returns a :class:`CheckReport` whose ``worst_margin`` is the
signed slack of the inequality (or minus the deviation of an identity);
a check fails iff ``worst_margin < -tolerance``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm

from .bounds import bracket_at_grid_optimum, constant_J, f_function, f_function_search, theorem_bounds
from .ensemble import Ensemble, EnsembleSpec
from .fock import FermionModel, FockSpace, build_hamiltonian, cooper_operator
from .gauge import GaugeCouplings, fluxes
from .lattice import LatticeSpec
from .twist import build_twist, lattice_g, log_twist_bound, tilde_laplacian_closed

__all__ = [
    "ResolutionError",
    "CheckReport",
    "QuantumGaugeParams",
    "check_twist_dominance",
    "check_trace_lemma",
    "check_heat_kernel",
    "w_functional",
    "check_w_functional",
    "check_boundary_vanishing",
    "check_gauge_covariance",
    "check_sup_bound",
    "check_identity_chain",
    "check_f_function",
    "check_exponent_assembly",
    "dominance_grid",
    "default_suite",
]


class ResolutionError(ValueError):
    """Grid too coarse to resolve the kernel or the test function."""


@dataclass
class CheckReport:
    name: str
    params: dict
    passed: bool
    worst_margin: float
    samples: int
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _report(name, params, margins, tol, **details) -> CheckReport:
    margins = np.asarray(margins, dtype=float).ravel()
    worst = float(margins.min()) if margins.size else 0.0
    return CheckReport(name, params, bool(worst >= -tol), worst, int(margins.size), tol, details)


@dataclass(frozen=True)
class QuantumGaugeParams:
    g_e: float = 1.0
    g_m: float = 1.0
    m: float = 0.0
    M: int = 1
    beta: float = 1.0

    def __post_init__(self):
        if not (self.g_e > 0 and self.g_m > 0 and self.beta > 0):
            raise ValueError("g_e, g_m and beta must be positive")
        if self.m < 0 or self.M < 1:
            raise ValueError("need m >= 0 and M >= 1")

    @property
    def eta(self) -> float:
        """Heat-kernel time of one Trotter step."""
        return self.beta / (2 * self.g_e * self.M)


# -- twist-bound dominance -------------------------------------------------------

def check_twist_dominance(spec: EnsembleSpec, u, v, phis, tol: float = 1e-9,
                          correlation: complex | None = None) -> CheckReport:
    """``|<c+_u c+_v c_-v c_-u>| <= finite-volume twist bound`` for every field in ``phis``."""
    lat = spec.lattice
    if correlation is None:
        correlation = Ensemble(spec).exact_expectation(cooper_operator(lat, u, v))
    lhs = abs(correlation)
    c = spec.couplings
    margins = []
    for phi in phis:
        logb = log_twist_bound(phi, c.beta, c.alpha, u, v, lat)
        # compare in a form that survives huge bounds
        margins.append(math.exp(min(logb, 700.0)) - lhs)
    params = {"beta": c.beta, "alpha": c.alpha, "kappa": c.kappa, "t": spec.model.t,
              "U": spec.model.U, "u": list(u), "v": list(v)}
    return _report("twist_dominance", params, margins, tol, correlation=[correlation.real, correlation.imag])


def dominance_grid(n_random: int = 50, seed: int = 0, nodes: int = 32):
    """Reports for the 3-site chain over the standard parameter grid."""
    lat = LatticeSpec.symmetric(1, 1)
    u = v = (1,)
    rng = np.random.default_rng(seed)
    out = []
    for beta in (0.5, 2.0):
        for alpha in (0.5, 2.0):
            for kappa in (0.0, 1.0):
                for U in (0.0, -2.0):
                    spec = EnsembleSpec(lat, FermionModel(t=1.0, U=U),
                                        GaugeCouplings(kappa=kappa, alpha=alpha, beta=beta), quad_nodes=nodes)
                    phis = [build_twist(q, u, 1e-3, math.pi, lat).phi for q in (0.1, 0.3, 1.0)]
                    phis += list(rng.normal(0.0, 1.0, (n_random, lat.n_sites)) * rng.uniform(0.05, 2.0, (n_random, 1)))
                    out.append(check_twist_dominance(spec, u, v, phis))
    return out


# -- trace lemma -----------------------------------------------------------------

def _haar_unitary(rng, n):
    Z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def check_trace_lemma(dim: int = 8, ell: int = 4, trials: int = 1000, rng=None,
                      tol: float = 1e-10) -> CheckReport:
    """``Tr (PU)^l (U* P)^l <= Tr P^{2l}`` for random PSD ``P`` and unitary ``U``.

    Margins are relative: ``(rhs - lhs) / rhs``.  The identity ``U = 1`` is
    run alongside and must give equality.
    """
    if dim > 16 or ell > 6:
        raise ValueError("dim <= 16 and ell <= 6 required")
    rng = np.random.default_rng(rng)
    margins, eq_dev = [], 0.0
    for _ in range(trials):
        G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        P = G @ G.conj().T
        P = P / np.linalg.norm(P, 2)
        U = _haar_unitary(rng, dim)
        X = np.linalg.matrix_power(P @ U, ell)
        lhs = np.trace(X @ X.conj().T).real
        rhs = np.trace(np.linalg.matrix_power(P, 2 * ell)).real
        margins.append((rhs - lhs) / rhs)
        Xi = np.linalg.matrix_power(P, ell)
        eq_dev = max(eq_dev, abs(np.trace(Xi @ Xi.conj().T).real - rhs) / rhs)
    return _report("trace_lemma", {"dim": dim, "ell": ell, "trials": trials}, margins, tol,
                   identity_deviation=eq_dev)


# -- heat kernel ----------------------------------------------------------------------

def _gauss(x, var):
    return np.exp(-x ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)


def heat_spectral(f, dx, eta):
    k = 2 * np.pi * np.fft.fftfreq(len(f), dx)
    return np.fft.ifft(np.fft.fft(f) * np.exp(-eta * k ** 2)).real


def heat_convolution(f, x, eta):
    dx = x[1] - x[0]
    K = np.exp(-(x[:, None] - x[None, :]) ** 2 / (4 * eta)) / math.sqrt(4 * math.pi * eta)
    return K @ f * dx


def check_heat_kernel(eta: float, n: int = 1024, sigma: float = 1.0, tol: float = 1e-6) -> CheckReport:
    """``exp(eta d^2)`` as Fourier multiplier vs Gaussian convolution of variance ``2 eta``.

    Test functions: a Gaussian of width ``sigma`` and a smooth bump supported
    on ``[-3 sigma, 3 sigma]``.  Also checks width composition and the
    semigroup property.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    half = 12 * math.sqrt(sigma ** 2 + 2 * eta)
    x = np.linspace(-half, half, n, endpoint=False)
    dx = x[1] - x[0]
    if dx > math.sqrt(2 * eta) or dx > sigma / 2:
        raise ResolutionError(f"grid spacing {dx:.3g} does not resolve eta={eta}, sigma={sigma}")
    r = x / (3 * sigma)
    bump = np.where(np.abs(r) < 1, np.exp(-1 / np.clip(1 - r ** 2, 1e-300, None)), 0.0)
    errs = []
    for f in (_gauss(x, sigma ** 2), bump):
        d = heat_spectral(f, dx, eta) - heat_convolution(f, x, eta)
        errs.append(math.sqrt(np.sum(d ** 2) * dx))
    g = _gauss(x, sigma ** 2)
    width_err = float(np.max(np.abs(heat_spectral(g, dx, eta) - _gauss(x, sigma ** 2 + 2 * eta))))
    semi = heat_spectral(heat_spectral(g, dx, eta / 2), dx, eta / 2) - heat_spectral(g, dx, eta)
    semi_err = math.sqrt(np.sum(semi ** 2) * dx)
    margins = [tol - errs[0], tol - errs[1], 1e-8 - width_err, 1e-8 - semi_err]
    return _report("heat_kernel", {"eta": eta, "n": n, "sigma": sigma}, margins, 0.0,
                   l2_gaussian=errs[0], l2_bump=errs[1], width_error=width_err, semigroup_error=semi_err)


# -- w functional ---------------------------------------------------------------------

def w_functional(phi, beta: float, alpha: float, m: float, lattice: LatticeSpec) -> float:
    """``(beta/alpha) sum_x (Delta phi)_x^2 + (beta m^2 / 2) sum_b (d phi)_b^2``."""
    phi = np.asarray(phi, dtype=float)
    lap = lattice.laplacian(phi)
    grad = lattice.grad(phi)
    return float(beta / alpha * np.sum(lap ** 2) + 0.5 * beta * m ** 2 * np.sum(grad ** 2))


def check_w_functional(phi, beta: float, alpha: float, lattice: LatticeSpec,
                       masses=(0.0, 0.1, 0.5, 1.0), tol: float = 1e-12) -> CheckReport:
    """Positivity, monotonicity in ``m^2``, the mass increment, and the cosh comparison."""
    phi = np.asarray(phi, dtype=float)
    ws = [w_functional(phi, beta, alpha, m, lattice) for m in masses]
    grad2 = float(np.sum(lattice.grad(phi) ** 2))
    scale = max(1.0, abs(ws[-1]))
    margins = [w / scale for w in ws]
    margins += [(b - a) / scale for a, b in zip(ws, ws[1:])]
    margins += [-abs((w - ws[0]) - 0.5 * beta * m ** 2 * grad2) / scale for w, m in zip(ws, masses)]
    lap = lattice.laplacian(phi)
    # x^2 / 2 <= cosh x - 1 pointwise, so the quadratic form sits below the cosh sum
    cosh_sum = float(np.sum(2 * np.sinh(lap / 2) ** 2))
    margins.append((beta / alpha * cosh_sum - 0.5 * ws[0]) / scale)
    return _report("w_functional", {"beta": beta, "alpha": alpha, "masses": list(masses)}, margins, tol,
                   values=ws)


# -- boundary terms -------------------------------------------------------------------

def check_boundary_vanishing(D: int = 3, L_list=(2, 3, 4, 6), u=None, eps: float = 1e-3,
                             q: float = 0.5, J: float | None = None, tol: float = 1e-12) -> CheckReport:
    """Boundary gradient sums decrease with ``L``; the termwise boundary inequality holds.

    The boundary gradient at ``x`` is ``(Delta~ phi - Delta phi)_x``, the sum of
    wrapped-neighbour differences across the faces ``x`` lies on.  Finite-L
    monotonicity stands in for the ``L -> infinity`` limit.
    """
    u = (1,) + (0,) * (D - 1) if u is None else tuple(u)
    if J is None:
        J = constant_J(D) if D >= 3 else None
    sums, margins = [], []
    for L in L_list:
        lat = LatticeSpec.symmetric(L, D)
        tw = build_twist(q, u, eps, math.pi, lat)
        dphi = lat.boundary_correction(tw.phi)
        tl = tilde_laplacian_closed(tw)
        lap = lat.laplacian(tw.phi)
        b = lat.boundary_mask
        sums.append(float(np.sum(dphi[b] ** 2)))
        qJ = q * J
        a, d = np.abs(tl[b]), np.abs(dphi[b])
        rhs = (np.cosh(d) - 1) + (math.cosh(qJ) - 1) / qJ ** 2 * a ** 2 * np.cosh(d) \
            + math.sinh(qJ) / qJ * a * np.sinh(d)
        lhs = np.cosh(lap[b]) - 1
        margins.extend((rhs - lhs) / np.maximum(1.0, rhs))
        margins.append(-float(np.max(np.abs(dphi[~b]))) if np.any(~b) else 0.0)
    margins.extend(s0 - s1 for s0, s1 in zip(sums, sums[1:]))
    report = _report("boundary_vanishing", {"D": D, "L": list(L_list), "u": list(u), "eps": eps, "q": q},
                     margins, tol, boundary_sums=sums)
    # strict decrease
    report.passed = report.passed and all(s1 < s0 for s0, s1 in zip(sums, sums[1:]))
    return report


# -- gauge covariance -----------------------------------------------------------------

def check_gauge_covariance(lattice: LatticeSpec, phi, chi, A=None, model: FermionModel | None = None,
                           beta: float = 1.0, alpha: float = 1.0, u=None, v=None,
                           tol: float = 1e-12, spectrum_tol: float = 1e-10) -> CheckReport:
    """Complex and real gauge identities on a small system.

    * ``Gamma c+_x Gamma^{-1} = e^{-phi_x} c+_x`` and ``Gamma c_x Gamma^{-1} = e^{phi_x} c_x``
    * ``Gamma H(A - i d phi) Gamma^{-1} = H(A)`` (hopping with the combined shift)
    * plaquette fluxes of ``d phi`` vanish
    * ``H(A + d chi) = G H(A) G^+`` and equal spectra
    * the gauge-fixing shift is a c-number: factoring ``e^{-beta dH}`` out of the
      trace agrees with exponentiating ``H + dH``
    * contour shift: ``Tr O e^{-beta H(A - i d phi)} = e^{-phi_u - phi_v + phi_-u + phi_-v} Tr O e^{-beta H(A)}``
    """
    if lattice.n_sites > 4:
        raise ValueError("covariance checks need at most 4 sites")
    model = model or FermionModel(t=1.0, U=-1.5)
    phi = np.asarray(phi, dtype=float)
    chi = np.asarray(chi, dtype=float)
    A = np.zeros(lattice.n_bonds) if A is None else np.asarray(A, dtype=float)
    space = FockSpace(lattice.n_sites)
    gam = space.gamma_diagonal(phi)
    dev = {}

    worst = 0.0
    for m in range(space.n_modes):
        cd = space.creation(m).toarray()
        lhs = (gam[:, None] * cd) / gam[None, :]
        worst = max(worst, np.abs(lhs - math.exp(-phi[m // 2]) * cd).max())
        c = cd.T
        lhs = (gam[:, None] * c) / gam[None, :]
        worst = max(worst, np.abs(lhs - math.exp(phi[m // 2]) * c).max())
    dev["gamma_conjugation"] = worst

    H = build_hamiltonian(model, A, lattice)
    Hs = build_hamiltonian(model, A - 1j * lattice.grad(phi), lattice)
    dev["hopping_invariance"] = float(np.abs((gam[:, None] * Hs) / gam[None, :] - H).max())

    dev["flux_invariance"] = float(np.abs(fluxes(lattice, lattice.grad(phi))).max(initial=0.0))

    G = space.gauge_phase_diagonal(chi)
    Hc = build_hamiltonian(model, A + lattice.grad(chi), lattice)
    dev["real_covariance"] = float(np.abs(Hc - (G[:, None] * H) * G.conj()[None, :]).max())
    spec_dev = float(np.abs(np.linalg.eigvalsh(Hc) - np.linalg.eigvalsh(H)).max())

    # gauge-fixing shift of the energy under A -> A - i d phi
    div = lattice.div(A)
    dH = complex(np.sum(np.cos(div) - np.cos(div - 1j * lattice.laplacian(phi))) / alpha)
    u = u if u is not None else tuple(lattice.sites[-1])
    v = v if v is not None else u
    O = cooper_operator(lattice, u, v).toarray()
    eye = np.eye(space.dim)
    unf = np.trace(O @ expm(-beta * (H + dH * eye)))
    fac = np.exp(-beta * dH) * np.trace(O @ expm(-beta * H))
    scale = max(1.0, abs(fac))
    dev["cnumber_factor"] = float(abs(unf - fac) / scale)

    iu, iv = lattice.index(u), lattice.index(v)
    imu, imv = lattice.index(lattice.reflect(u)), lattice.index(lattice.reflect(v))
    factor = math.exp(-phi[iu] - phi[iv] + phi[imu] + phi[imv])
    shifted = np.trace(O @ expm(-beta * Hs))
    plain = np.trace(O @ expm(-beta * H))
    dev["contour_shift"] = float(abs(shifted - factor * plain) / max(1.0, abs(factor * plain)))

    rep = _report("gauge_covariance", {"n_sites": lattice.n_sites}, [-d for d in dev.values()], tol,
                  spectrum_deviation=spec_dev, **dev)
    rep.passed = rep.passed and spec_dev <= spectrum_tol
    return rep


# -- bound-engine invariants ------------------------------------------------------------

def check_sup_bound(D: int = 3, L_list=(3, 5, 7), eps_list=(1e-2, 1e-3), J: float | None = None,
                    q: float = 1.0, exhaustive: bool = False) -> CheckReport:
    """``||Delta~ phi||_inf <= q J`` over twist fields.

    By default ``u`` runs along axes and diagonals; ``exhaustive=True`` takes
    every nonzero site of the lattice, one of each ``{u, -u}`` pair (the field
    is odd in ``u``).
    """
    J = constant_J(D) if J is None else J
    margins, worst_ratio = [], 0.0
    for L in L_list:
        lat = LatticeSpec.symmetric(L, D)
        if exhaustive:
            us = [tuple(int(c) for c in x) for x in lat.sites
                  if tuple(x) > tuple(-c for c in x)]
        else:
            us = []
            for n in range(1, L + 1):
                us.append((n,) + (0,) * (D - 1))
                us.append((n,) * D)
                us.append((n, -n) + (0,) * (D - 2) if D > 1 else (n,))
        for eps in eps_list:
            for u in us:
                tl = tilde_laplacian_closed(build_twist(q, u, eps, math.pi, lat))
                ratio = float(np.max(np.abs(tl))) / q
                worst_ratio = max(worst_ratio, ratio)
                margins.append(J - ratio)
    return _report("sup_bound", {"D": D, "L": list(L_list), "eps": list(eps_list), "exhaustive": exhaustive},
                   margins, 0.0, J=J, worst_ratio=worst_ratio)


def check_identity_chain(L: int = 4, D: int = 3, eps: float = 1e-3, q: float = 0.7, rng=None,
                         trials: int = 10, tol: float = 1e-10) -> CheckReport:
    """``q g(u) = phi_u - phi_-u`` and ``q g(u,v) = (phi_u - phi_-u) - (phi_v - phi_-v)``;
    the quadratic cosh bound on realized ``Delta~ phi`` values."""
    rng = np.random.default_rng(rng)
    lat = LatticeSpec.symmetric(L, D)
    J = constant_J(D)
    margins = []
    for _ in range(trials):
        u = tuple(int(c) for c in rng.integers(-L, L + 1, D))
        v = tuple(int(c) for c in rng.integers(-L, L + 1, D))
        tw = build_twist(q, u, eps, math.pi, lat)
        gu, guv = lattice_g(lat, u, v, eps)
        du = tw.at(u) - tw.at(lat.reflect(u))
        dv = tw.at(v) - tw.at(lat.reflect(v))
        margins.append(-abs(q * gu - du))
        margins.append(-abs(q * guv - (du - dv)))
        x = tilde_laplacian_closed(tw)
        qJ = q * J
        ok = np.abs(x) <= qJ
        lhs = np.cosh(x[ok]) - 1
        rhs = (math.cosh(qJ) - 1) * x[ok] ** 2 / qJ ** 2
        margins.extend(rhs - lhs)
    return _report("identity_chain", {"L": L, "D": D, "eps": eps, "q": q}, margins, tol)


def check_f_function(J: float | None = None, n: int = 50, tol: float = 1e-6) -> CheckReport:
    """Closed-form ``f`` vs golden-section search over ``s in [1e-2, 1e3]``; ``f(s) s`` near ``1/2``."""
    J = constant_J(3) if J is None else J
    margins = []
    for s in np.logspace(-2, 3, n):
        a, _ = f_function(s, J)
        b, _ = f_function_search(s, J)
        margins.append(tol - abs(a - b) / abs(a))
    prod = f_function(1e4, J)[0] * 1e4
    margins.append(0.005 - abs(prod - 0.5))
    return _report("f_function", {"J": J, "n": n}, margins, 0.0, asymptotic_product=prod)


def check_exponent_assembly(u=(8, 0, 0), v=(8, 1, 0), beta: float = 1.0, alpha: float = 1.0,
                            n_grid: int = 20001) -> CheckReport:
    """Packaged exponent vs the bracket evaluated at the grid optimum of ``q``."""
    rep = theorem_bounds(u, v, beta, alpha)
    # the grid end is chosen so that q_sup is not itself a node
    grid = np.linspace(0.0, (4 + 1 / math.pi) * rep.q_sup, n_grid)
    qo, bracket = bracket_at_grid_optimum(rep, grid)
    h = grid[1] - grid[0]
    # the bracket is Lipschitz in q with constant bounded by its slope at the grid ends
    slope = 2 * rep.g_u + abs(rep.g_uv) + 4 * beta / alpha * rep.g_u * math.sinh(grid[-1] * rep.J) / rep.J
    tol = slope * h
    return _report("exponent_assembly", {"u": list(u), "v": list(v), "beta": beta, "alpha": alpha},
                   [tol - abs(bracket - rep.exponent)], 0.0, exponent=rep.exponent, bracket=bracket, q=qo)


# -- suite ----------------------------------------------------------------------------

def default_suite(seed: int = 0, n_random: int = 50, trace_trials: int = 1000,
                  nodes: int = 32) -> list[CheckReport]:
    """Every check at its standard size, with fixed seeds; runs in seconds."""
    rng = np.random.default_rng(seed)
    reports = dominance_grid(n_random=n_random, seed=seed, nodes=nodes)
    reports.append(check_trace_lemma(trials=trace_trials, rng=rng))
    reports.append(check_heat_kernel(0.3))
    lat = LatticeSpec.symmetric(3, 2)
    reports.append(check_w_functional(build_twist(0.5, (1, 1), 1e-3, math.pi, lat).phi, 1.0, 1.0, lat))
    reports.append(check_boundary_vanishing())
    reports.append(check_gauge_covariance(LatticeSpec.box((2,)), rng.normal(size=2), rng.normal(size=2),
                                          rng.uniform(-np.pi, np.pi, 1), u=(1,), v=(1,)))
    reports.append(check_gauge_covariance(LatticeSpec.box((2, 2)), 0.5 * rng.normal(size=4),
                                          rng.normal(size=4), rng.uniform(-np.pi, np.pi, 4),
                                          u=(1, 1), v=(1, 1)))
    J = constant_J(3)
    reports.append(check_sup_bound(J=J))
    reports.append(check_identity_chain(rng=rng))
    reports.append(check_f_function(J))
    reports.append(check_exponent_assembly())
    return reports
