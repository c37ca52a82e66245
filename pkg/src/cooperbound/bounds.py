"""Analytic decay envelopes for the Cooper-pair correlation.

For the classical compact ensemble the bound is ``exp(-f(beta/alpha) g(u) +
q_sup |g(u, v)|)`` with

    f(s) = 2 sup_{q>0} [q - 2s (cosh(qJ) - 1) / J^2],

maximized at ``q_sup = asinh(J / 2s) / J``.  For the quantum noncompact
ensemble the exponent is ``-(alpha / 4 beta) (g(u) - |g(u, v)|)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import bzquad
from .bzquad import QuadratureError
from .lattice import LatticeSpec
from .twist import lattice_g

__all__ = [
    "DomainError",
    "QuadratureError",
    "BoundReport",
    "ScalingResult",
    "constant_J",
    "constant_c0",
    "f_function",
    "f_function_search",
    "g_integrals",
    "theorem_bounds",
    "bracket_at_grid_optimum",
    "continuum_scaling",
    "scan_rows",
    "scan_csv",
]

SCAN_COLUMNS = ("|u|", "g_u", "g_uv", "f", "exponent", "bound")


class DomainError(ValueError):
    pass


def constant_J(D: int, level: int = 1) -> float:
    """``4 (2 pi)^{-D} int dk / E(k)``, a uniform bound on ``|Delta~ phi| / q``."""
    if D <= 2:
        raise QuadratureError(f"integral of 1/E diverges in D={D}")
    return bzquad.green_origin(D, level=level)


def constant_c0(K: float = math.pi) -> float:
    """Largest ``c`` with ``1 - cos k >= c k^2`` on ``[-K, K]``.

    ``(1 - cos k) / k^2`` decreases on ``(0, pi]`` so the minimum sits at ``K``.
    """
    if not 0 < K <= math.pi:
        raise DomainError(f"K must be in (0, pi], got {K}")
    return (2 * math.sin(K / 2) ** 2) / K ** 2


def _objective(q, s, J):
    return q - 2 * s * (2 * math.sinh(q * J / 2) ** 2) / J ** 2


def f_function(s: float, J: float) -> tuple[float, float]:
    """``(f(s), q_sup)`` from the stationarity condition ``sinh(q J) = J / 2s``."""
    if not s > 0:
        raise DomainError(f"s must be > 0, got {s}")
    if not J > 0:
        raise DomainError(f"J must be > 0, got {J}")
    q = math.asinh(J / (2 * s)) / J
    return 2 * _objective(q, s, J), q


def f_function_search(s: float, J: float) -> tuple[float, float]:
    """Golden-section maximization of the same objective."""
    if not s > 0:
        raise DomainError(f"s must be > 0, got {s}")
    # the objective is concave: rescale until (hi/2, hi, 2 hi) brackets its maximum
    ob = lambda q: _objective(q, s, J)
    hi = 1.0 / J
    while ob(hi / 2) >= ob(hi):
        hi /= 2
    while ob(2 * hi) > ob(hi):
        hi *= 2
    res = minimize_scalar(lambda q: -ob(q), bracket=(hi / 2, hi, 2 * hi),
                          method="golden", tol=1e-12)
    return 2 * _objective(res.x, s, J), float(res.x)


def g_integrals(u, v, eps: float = 1e-3, K: float = math.pi, D: int | None = None,
                mode: str = "continuum", L: int | None = None,
                exponent: float = 2.0) -> tuple[float, float, dict]:
    """``(g(u), g(u, v), diagnostics)``.

    ``mode="continuum"`` integrates over the cutoff Brillouin zone;
    ``mode="lattice"`` sums over the ``(2L+1)^D`` grid.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    D = len(u) if D is None else D
    if len(u) != D or len(v) != D:
        raise ValueError("u and v must have D components")
    if not 0 < eps < K <= math.pi:
        raise DomainError(f"need 0 < eps < K <= pi, got eps={eps}, K={K}")
    if mode == "lattice":
        if L is None:
            raise ValueError("lattice mode needs L")
        gu, guv = lattice_g(LatticeSpec.symmetric(L, D), tuple(int(c) for c in u),
                            tuple(int(c) for c in v), eps, K, exponent)
        return gu, guv, {"mode": "lattice", "L": L}
    if mode != "continuum":
        raise ValueError(f"unknown mode {mode!r}")
    # g(u) = S(2u), g(u, v) = S(2u) - S(u + v) + S(u - v)
    res = bzquad.bz_integral([2 * u, u + v, u - v], D, exponent, eps, K)
    s2u, splus, sminus = (r.value for r in res)
    diag = {"mode": "continuum", "error": max(r.error for r in res),
            "t_nodes": res[0].t_nodes, "k_nodes": res[0].k_nodes}
    return s2u, s2u - splus + sminus, diag


@dataclass
class BoundReport:
    theorem: str
    D: int
    beta: float
    alpha: float
    u: list
    v: list
    eps: float
    K: float
    J: float
    q_sup: float
    f: float
    g_u: float
    g_uv: float
    exponent: float
    bound: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def theorem_bounds(u, v, beta: float, alpha: float, D: int | None = None, *,
                   theorem: str = "classical", eps: float = 1e-3, K: float = math.pi,
                   J: float | None = None) -> BoundReport:
    """Decay envelope of the Cooper-pair correlation in ``D = 3, 4``."""
    u = [int(c) for c in np.atleast_1d(u)]
    v = [int(c) for c in np.atleast_1d(v)]
    D = len(u) if D is None else D
    if D not in (3, 4):
        raise DomainError(f"envelopes are defined for D in (3, 4), got {D}")
    if not (beta > 0 and alpha > 0):
        raise DomainError("beta and alpha must be positive")
    g_u, g_uv, diag = g_integrals(u, v, eps, K, D)
    if J is None:
        J = constant_J(D)
    if theorem == "classical":
        f, q_sup = f_function(beta / alpha, J)
        exponent = -f * g_u + q_sup * abs(g_uv)
    elif theorem == "quantum":
        f = q_sup = alpha / (4 * beta)
        exponent = -f * (g_u - abs(g_uv))
    else:
        raise ValueError(f"unknown theorem {theorem!r}")
    return BoundReport(theorem, D, beta, alpha, u, v, eps, K, J, q_sup, f, g_u, g_uv,
                       exponent, math.exp(exponent), diag)


def bracket_at_grid_optimum(report: BoundReport, q_grid: np.ndarray) -> tuple[float, float]:
    """Re-assemble the classical exponent from its unoptimized form.

    The bound holds for every ``q`` with exponent
    ``-2q g + (4 beta/alpha)(cosh qJ - 1) g / J^2 + q |g_uv|``.  Taking ``q``
    at the grid maximum of ``q - 2 (beta/alpha)(cosh qJ - 1)/J^2`` must
    reproduce the packaged exponent up to grid resolution.  Returns
    ``(q_grid_opt, bracket)``.
    """
    s, J = report.beta / report.alpha, report.J
    q = np.asarray(q_grid, dtype=float)
    obj = q - 2 * s * (2 * np.sinh(q * J / 2) ** 2) / J ** 2
    qo = float(q[int(np.argmax(obj))])
    cosh1 = 2 * math.sinh(qo * J / 2) ** 2
    bracket = -2 * qo * report.g_u + 4 * s * cosh1 * report.g_u / J ** 2 + qo * abs(report.g_uv)
    return qo, bracket


class ScalingResult(NamedTuple):
    regime: str
    value: float


def continuum_scaling(ell: float, alpha_of_ell: Callable[[float], float], beta: float,
                      r: float, c3: float = 1.0) -> ScalingResult:
    """``exp(-c3 (alpha(ell) / beta) ell r)`` under lattice refinement by ``ell``.

    ``regime`` is ``"vanishing"`` when ``alpha(ell) ell`` grows with ``ell``
    (the envelope goes to zero at every ``r > 0``) and ``"finite"`` when it
    stays fixed.
    """
    if ell < 1 or r < 0:
        raise DomainError("need ell >= 1 and r >= 0")
    a = float(alpha_of_ell(ell))
    prod, prod2 = a * ell, float(alpha_of_ell(2 * ell)) * 2 * ell
    regime = "finite" if math.isclose(prod, prod2, rel_tol=1e-9) else (
        "vanishing" if prod2 > prod else "growing")
    return ScalingResult(regime, math.exp(-c3 * a / beta * ell * r))


def scan_rows(axis_values: Sequence[int], beta: float, alpha: float, D: int = 3, *,
              offset: Sequence[int] | None = None, theorem: str = "classical",
              eps: float = 1e-3, K: float = math.pi) -> list[dict]:
    """Bound along ``u = n e_1`` with ``v = u + offset`` for each ``n``."""
    offset = [0] * D if offset is None else list(offset)
    J = constant_J(D)
    rows = []
    for n in axis_values:
        u = [int(n)] + [0] * (D - 1)
        v = [a + b for a, b in zip(u, offset)]
        rep = theorem_bounds(u, v, beta, alpha, D, theorem=theorem, eps=eps, K=K, J=J)
        rows.append({"|u|": float(np.linalg.norm(u)), "g_u": rep.g_u, "g_uv": rep.g_uv,
                     "f": rep.f, "exponent": rep.exponent, "bound": rep.bound})
    return rows


def scan_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(float(row[k])) for k in SCAN_COLUMNS})
    return buf.getvalue()
