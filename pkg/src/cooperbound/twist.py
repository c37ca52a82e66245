"""Twist fields on symmetric lattices and the finite-volume Cooper-pair bound.

On ``{-L..L}^D`` with ``n = 2L+1`` sites per axis the wavenumbers are
``k_i = 2 pi m_i / n``.  The twist field for charge ``q`` and site ``u`` is

    phi_x = (2q / |Lambda|) sum_{k in M} sin(k.x) sin(k.u) / E(k)^p

which is the Fourier solution of ``(-Delta~)^p``-type equations with the odd
source ``delta_{x,u} - delta_{x,-u}`` restricted to the cutoff set ``M``.
Applying the periodic stencil gives

    (Delta~ phi)_x = -(4q / |Lambda|) sum_{k in M} sin(k.x) sin(k.u) / E(k)^{p-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeError, LatticeSpec, UnsupportedGeometryError

__all__ = [
    "CutoffError",
    "TwistField",
    "wavenumber_grid",
    "build_twist",
    "tilde_laplacian_closed",
    "lattice_g",
    "finite_volume_twist_bound",
    "log_twist_bound",
]


class CutoffError(ValueError):
    pass


def _axis_k(L: int) -> np.ndarray:
    n = 2 * L + 1
    return 2 * np.pi * np.arange(-L, L + 1) / n


def _mask(L, eps, K, D):
    k = _axis_k(L)
    ok = (np.abs(k) >= eps) & (np.abs(k) <= K)
    m = ok
    for _ in range(D - 1):
        m = np.multiply.outer(m, ok)
    return m


def wavenumber_grid(L: int, eps: float, K: float, D: int) -> np.ndarray:
    """All ``k`` on the ``(2L+1)``-point grid with ``eps <= |k_i| <= K``, shape ``(n, D)``."""
    if not 0 < eps < K <= np.pi:
        raise CutoffError(f"need 0 < eps < K <= pi, got eps={eps}, K={K}")
    k = _axis_k(L)
    grid = np.stack(np.meshgrid(*([k] * D), indexing="ij"), -1).reshape(-1, D)
    keep = np.all((np.abs(grid) >= eps) & (np.abs(grid) <= K), axis=1)
    if not keep.any():
        raise CutoffError(f"no wavenumbers with eps={eps}, K={K} on a {2 * L + 1}-point axis")
    return grid[keep]


def _energy(L, D):
    b = 1 - np.cos(_axis_k(L))
    E = np.zeros((2 * L + 1,) * D)
    for ax in range(D):
        shape = [1] * D
        shape[ax] = -1
        E = E + b.reshape(shape)
    return E


def _sin_ku(L, D, u):
    """``sin(k.u)`` on the centred grid."""
    phase = np.zeros((2 * L + 1,) * D)
    k = _axis_k(L)
    for ax in range(D):
        shape = [1] * D
        shape[ax] = -1
        phase = phase + (k * u[ax]).reshape(shape)
    return np.sin(phase)


def _fourier_sum(L, D, coef):
    """``sum_k coef(k) e^{ik.x}`` for every site, both on centred index order."""
    # centred m -> DFT order, inverse transform, then back to x = -L..L
    c = np.fft.ifftshift(coef)
    vals = np.fft.ifftn(c) * c.size
    return np.fft.fftshift(vals)


@dataclass(frozen=True, eq=False)
class TwistField:
    q: float
    u: tuple[int, ...]
    eps: float
    K: float
    exponent: float
    lattice: LatticeSpec
    phi: np.ndarray
    residue: float        # max |Im| / max |phi| before discarding the imaginary part

    def at(self, x) -> float:
        return float(self.phi[self.lattice.index(x)])


def _check(lattice, u):
    if not lattice.is_symmetric or len(set(lattice.hi)) != 1:
        raise UnsupportedGeometryError("twist fields need a {-L..L}^D lattice")
    u = tuple(int(c) for c in np.atleast_1d(u))
    if not lattice.contains(u):
        raise LatticeError(f"site {u} outside the lattice")
    return u


def build_twist(q: float, u, eps: float, K: float, lattice: LatticeSpec,
                exponent: float = 2.0) -> TwistField:
    u = _check(lattice, u)
    L, D = lattice.L, lattice.dim
    if not 0 < eps < K <= np.pi:
        raise CutoffError(f"need 0 < eps < K <= pi, got eps={eps}, K={K}")
    mask = _mask(L, eps, K, D)
    E = _energy(L, D)
    coef = np.zeros_like(E, dtype=complex)
    # sum_y e^{-ik.y} p_y = -2i sin(k.u)
    coef[mask] = -2j * _sin_ku(L, D, u)[mask] / E[mask] ** exponent
    vals = q * _fourier_sum(L, D, coef) / lattice.n_sites
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    residue = float(np.max(np.abs(vals.imag)) / scale) if scale > 0 else 0.0
    phi = np.ascontiguousarray(vals.real.ravel())
    phi.setflags(write=False)
    return TwistField(float(q), u, float(eps), float(K), float(exponent), lattice, phi, residue)


def tilde_laplacian_closed(twist: TwistField) -> np.ndarray:
    """Extended Laplacian of a twist field from its Fourier representation."""
    lat = twist.lattice
    L, D = lat.L, lat.dim
    mask = _mask(L, twist.eps, twist.K, D)
    E = _energy(L, D)
    coef = np.zeros_like(E, dtype=complex)
    # the stencil multiplies each mode by -2 E(k)
    coef[mask] = 4j * _sin_ku(L, D, twist.u)[mask] / E[mask] ** (twist.exponent - 1)
    vals = twist.q * _fourier_sum(L, D, coef) / lat.n_sites
    return np.ascontiguousarray(vals.real.ravel())


def lattice_g(lattice: LatticeSpec, u, v, eps: float, K: float = math.pi,
              exponent: float = 2.0) -> tuple[float, float]:
    """Finite-volume ``(g(u), g(u, v))`` as sums over the cutoff grid.

    ``g(u) = (4/|Lambda|) sum sin^2(k.u) / E^p`` and
    ``g(u, v) = (4/|Lambda|) sum sin(k.u) (sin(k.u) - sin(k.v)) / E^p``.
    """
    u, v = _check(lattice, u), _check(lattice, v)
    L, D = lattice.L, lattice.dim
    mask = _mask(L, eps, K, D)
    E = _energy(L, D)[mask] ** exponent
    su, sv = _sin_ku(L, D, u)[mask], _sin_ku(L, D, v)[mask]
    n = lattice.n_sites
    return float(4 * np.sum(su * su / E) / n), float(4 * np.sum(su * (su - sv) / E) / n)


def log_twist_bound(phi, beta: float, alpha: float, u, v, lattice: LatticeSpec) -> float:
    """Logarithm of :func:`finite_volume_twist_bound`."""
    phi = np.asarray(phi.phi if isinstance(phi, TwistField) else phi, dtype=float)
    iu, iv = lattice.index(u), lattice.index(v)
    imu, imv = lattice.index(lattice.reflect(u)), lattice.index(lattice.reflect(v))
    source = -phi[iu] - phi[iv] + phi[imu] + phi[imv]
    lap = lattice.laplacian(phi)
    return float(source + (beta / alpha) * np.sum(2 * np.sinh(lap / 2) ** 2))


def finite_volume_twist_bound(phi, beta: float, alpha: float, u, v, lattice: LatticeSpec) -> float:
    """``e^{-phi_u - phi_v + phi_{-u} + phi_{-v}} exp[(beta/alpha) sum_x (cosh (Delta phi)_x - 1)]``.

    ``Delta`` is the open-boundary Laplacian.  Valid as an upper bound on
    the magnitude of the Cooper-pair correlation for any real ``phi``.
    """
    return math.exp(log_twist_bound(phi, beta, alpha, u, v, lattice))
