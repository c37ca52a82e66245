"""Brillouin-zone integrals with an infrared cutoff.

All integrals here have the form

    S_p(w) = 4 (2 pi)^{-D} int_M dk sin^2(k.w / 2) / E(k)^p,
    E(k)   = sum_i (1 - cos k_i),

over ``M = {k : lo <= |k_i| <= hi for every i}``.  Averaging over the sign
of each component turns ``sin^2(k.w/2)`` into ``(1 - prod_j cos(k_j w_j)) / 2``
and the Schwinger representation ``E^{-p} = Gamma(p)^{-1} int t^{p-1} e^{-tE} dt``
factorizes the D-dimensional integral into one-dimensional axis integrals

    h(t)   = int_lo^hi e^{-t b(k)} dk,
    d_w(t) = int_lo^hi 2 sin^2(k w / 2) e^{-t b(k)} dk,   b(k) = 1 - cos k.

The product difference is telescoped,
``h^D - prod_j (h - d_j) = sum_j d_j prod_{i<j} (h - d_i) h^{D-1-j}``, so
nothing cancels catastrophically even when ``|w|^2 / t`` is tiny.  The
t-integral runs over ``log t`` with composite Gauss-Legendre panels; axis
integrals use panels graded geometrically away from ``lo`` and no wider
than a quarter oscillation period.  Every result is recomputed with all
panels halved and the two must agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

__all__ = ["QuadratureError", "QuadResult", "bz_integral", "green_origin"]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float          # |fine - coarse|
    t_nodes: int
    k_nodes: int


def _panels(breaks: np.ndarray):
    a, b = breaks[:-1], breaks[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    x = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    return x, w


def _refine(breaks: np.ndarray, level: int) -> np.ndarray:
    for _ in range(level):
        mids = (breaks[:-1] + breaks[1:]) / 2
        out = np.empty(2 * len(breaks) - 1)
        out[0::2], out[1::2] = breaks, mids
        breaks = out
    return breaks


def _k_breaks(lo, hi, wmax, smallest):
    width = min(0.25, math.pi / (2 * wmax)) if wmax > 0 else 0.25
    geo = []
    step = smallest
    while step < width and lo + step < hi:
        geo.append(lo + step)
        step *= 2
    start = geo[-1] if geo else lo
    n_uni = max(1, math.ceil((hi - start) / width))
    uni = np.linspace(start, hi, n_uni + 1)
    return np.unique(np.concatenate([[lo], geo, uni]))


def _integrate(ws, D, p, lo, hi, level):
    """One evaluation of ``S_p`` for every shift vector in ``ws`` at a refinement level."""
    ws = np.abs(np.asarray(ws, dtype=float))
    wmax = float(ws.max()) if ws.size else 0.0
    b_lo = 1 - math.cos(lo)
    if lo > 0:
        t_max = 80.0 / (D * b_lo)
    else:
        t_max = 1e10
    t_min = 1e-10
    s_breaks = _refine(np.linspace(math.log(t_min), math.log(t_max),
                                   max(2, math.ceil((math.log(t_max) - math.log(t_min)) / 0.5)) + 1), level)
    s, sw = _panels(s_breaks)
    t = np.exp(s)
    tw = sw * t                                    # dt = t ds

    k_breaks = _refine(_k_breaks(lo, hi, wmax, 1e-9), level)
    k, kw = _panels(k_breaks)
    bk = 1 - np.cos(k)
    # e^{-t b(k)} relative to its value at k = lo keeps large-t axis factors finite
    decay = np.exp(-np.outer(t, bk - b_lo)) * kw
    scale = np.exp(-t * b_lo)
    h = decay.sum(axis=1)
    out = []
    for w in ws:
        d = [decay @ (2 * np.sin(k * wj / 2) ** 2) if wj else np.zeros_like(t) for wj in w]
        tot = np.zeros_like(t)
        pre = np.ones_like(t)
        for j in range(D):
            tot += d[j] * pre * h ** (D - 1 - j)
            pre = pre * (h - d[j])
        F = 0.5 * tot * scale ** D
        val = float(np.sum(tw * t ** (p - 1) * F))
        # F is flat below t_min
        val += float(F[0]) * t_min ** p / p
        out.append(4 * math.pi ** (-D) * val / gamma(p))
    return np.array(out), len(t), len(k)


def bz_integral(ws, D: int, p: float = 2.0, lo: float = 1e-3, hi: float = math.pi,
                rtol: float = 1e-6) -> list[QuadResult]:
    """``S_p(w)`` for each row of ``ws`` with a refinement self-check."""
    ws = np.atleast_2d(np.asarray(ws, dtype=float))
    if ws.shape[1] != D:
        raise ValueError(f"shift vectors must have {D} components")
    if not 0 <= lo < hi <= math.pi:
        raise ValueError(f"cutoffs must satisfy 0 <= lo < hi <= pi, got {lo}, {hi}")
    if lo == 0 and D <= 2 * p - 2:
        raise QuadratureError(f"integral diverges for D={D}, p={p} without an infrared cutoff")
    coarse, _, _ = _integrate(ws, D, p, lo, hi, 0)
    fine, nt, nk = _integrate(ws, D, p, lo, hi, 1)
    err = np.abs(fine - coarse)
    bad = err > rtol * np.maximum(np.abs(fine), 1e-300)
    if np.any(bad & (np.abs(fine) > 0)):
        i = int(np.argmax(bad))
        raise QuadratureError(f"refinement disagrees for w={ws[i]}: {coarse[i]} vs {fine[i]}")
    return [QuadResult(float(v), float(e), nt, nk) for v, e in zip(fine, err)]


def green_origin(D: int, lo: float = 0.0, hi: float = math.pi, level: int = 1) -> float:
    """``4 (2 pi)^{-D} int_M dk / E(k)`` by the same axis factorization."""
    if lo == 0 and D <= 2:
        raise QuadratureError(f"integral of 1/E diverges in D={D}")
    b_lo = 1 - math.cos(lo)
    t_max = 80.0 / (D * b_lo) if lo > 0 else 1e10
    s_breaks = _refine(np.linspace(math.log(1e-10), math.log(t_max),
                                   math.ceil((math.log(t_max) + math.log(1e10)) / 0.5) + 1), level)
    s, sw = _panels(s_breaks)
    t = np.exp(s)
    k, kw = _panels(_refine(_k_breaks(lo, hi, 0.0, 1e-9), level))
    h = (np.exp(-np.outer(t, 1 - np.cos(k) - b_lo)) * kw).sum(axis=1) * np.exp(-t * b_lo)
    val = float(np.sum(sw * t * h ** D))
    # h(t) ~ hi - lo below t_min
    val += 1e-10 * (hi - lo) ** D
    if lo == 0:
        # h(t) ~ sqrt(pi / 2t) beyond t_max
        val += (math.pi / 2) ** (D / 2) * t_max ** (1 - D / 2) / (D / 2 - 1)
    return 4 * math.pi ** (-D) * val
