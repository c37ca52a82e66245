"""Finite hypercubic lattices with open boundary conditions.

Sites are indexed in C (lexicographic) order of their coordinates.  A bond is
stored once, in its canonical orientation ``(x, x + e_i)``; the value of a
bond field on the reversed bond is the negation of the stored value.

Sign conventions
----------------
gradient     ``(d phi)_{x,y} = phi_x - phi_y``; on a canonical bond this is
             ``phi_x - phi_{x+e_i}``.
divergence   ``(d* A)_x = sum_i (A_{x+e_i,x} - A_{x,x-e_i})`` with bonds that
             leave the lattice contributing zero.  With canonical storage a
             bond ``b = (x, y)`` adds ``-A_b`` at ``x`` and ``+A_b`` at ``y``.
laplacian    ``Delta = d* d``, i.e. the nearest-neighbour stencil restricted
             to neighbours inside the lattice.

With these conventions ``sum_x phi_x (d* A)_x = -sum_b (d phi)_b A_b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "LatticeError",
    "UnsupportedGeometryError",
    "LatticeSpec",
    "Enumeration",
    "enumerate_lattice",
    "gradient",
    "divergence",
    "laplacian_open",
    "laplacian_extended",
]


class LatticeError(ValueError):
    """Invalid lattice specification or a site/bond outside the lattice."""


class UnsupportedGeometryError(LatticeError):
    """Operation needs the symmetric ``{-L..L}^D`` geometry."""


@dataclass(frozen=True)
class LatticeSpec:
    """Box ``prod_i [lo_i, hi_i]`` of integer sites, open boundaries.

    Use :meth:`symmetric` for the ``{-L, ..., L}^D`` lattices on which the
    Fourier machinery works, and :meth:`box` for small general boxes.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(a) for a in self.lo)
        hi = tuple(int(b) for b in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise LatticeError("lo and hi must have the same length")
        if not 1 <= len(lo) <= 4:
            raise LatticeError(f"dimension must be in 1..4, got {len(lo)}")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if b - a + 1 < 2:
                raise LatticeError(f"axis {i} has extent {b - a + 1} < 2")

    @classmethod
    def symmetric(cls, L: int, dim: int) -> "LatticeSpec":
        if L < 1:
            raise LatticeError(f"L must be >= 1, got {L}")
        return cls((-L,) * dim, (L,) * dim)

    @classmethod
    def box(cls, shape: Sequence[int], origin: Sequence[int] | None = None) -> "LatticeSpec":
        shape = tuple(int(n) for n in shape)
        origin = (0,) * len(shape) if origin is None else tuple(origin)
        return cls(origin, tuple(o + n - 1 for o, n in zip(origin, shape)))

    # -- basic geometry -------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_symmetric(self) -> bool:
        return all(a == -b for a, b in zip(self.lo, self.hi))

    @property
    def L(self) -> int:
        if not self.is_symmetric or len(set(self.hi)) != 1:
            raise UnsupportedGeometryError("lattice is not of the form {-L..L}^D")
        return self.hi[0]

    @cached_property
    def sites(self) -> np.ndarray:
        """Integer coordinates, shape ``(n_sites, dim)``, lexicographic."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def index(self, x: Sequence[int]) -> int:
        x = tuple(int(c) for c in np.atleast_1d(x))
        if len(x) != self.dim or not self.contains(x):
            raise LatticeError(f"site {x} outside lattice {self.lo}..{self.hi}")
        return int(np.ravel_multi_index(tuple(c - a for c, a in zip(x, self.lo)), self.shape))

    def contains(self, x: Sequence[int]) -> bool:
        x = tuple(np.atleast_1d(x))
        return len(x) == self.dim and all(a <= c <= b for c, a, b in zip(x, self.lo, self.hi))

    def reflect(self, x: Sequence[int]) -> tuple[int, ...]:
        """Point reflection through the box centre; ``-x`` on symmetric lattices."""
        return tuple(a + b - int(c) for c, a, b in zip(np.atleast_1d(x), self.lo, self.hi))

    # -- bonds and plaquettes ---------------------------------------------
    @cached_property
    def bonds(self) -> np.ndarray:
        """Canonical bonds as rows ``(i, j, axis)`` with ``site j = site i + e_axis``.

        Ordered by start site, then axis.
        """
        shape = self.shape
        idx = np.arange(self.n_sites).reshape(shape)
        rows = []
        for i in range(self.n_sites):
            pos = np.unravel_index(i, shape)
            for ax in range(self.dim):
                if pos[ax] + 1 < shape[ax]:
                    nxt = list(pos)
                    nxt[ax] += 1
                    rows.append((i, int(idx[tuple(nxt)]), ax))
        return np.array(rows, dtype=np.int64).reshape(-1, 3)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def _bond_lookup(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): b for b, (i, j, _) in enumerate(self.bonds)}

    def bond_index(self, x: Sequence[int], y: Sequence[int]) -> tuple[int, int]:
        """Return ``(b, orientation)``: ``+1`` if ``(x, y)`` is canonical, ``-1`` if reversed."""
        i, j = self.index(x), self.index(y)
        if (i, j) in self._bond_lookup:
            return self._bond_lookup[(i, j)], 1
        if (j, i) in self._bond_lookup:
            return self._bond_lookup[(j, i)], -1
        raise LatticeError(f"{tuple(x)} and {tuple(y)} are not nearest neighbours")

    @cached_property
    def plaquettes(self) -> np.ndarray:
        """Plaquettes as rows of four bond indices ``(b1, b2, b3, b4)``.

        The oriented flux is ``A[b1] + A[b2] - A[b3] - A[b4]`` for the loop
        ``x -> x+e_i -> x+e_i+e_j -> x+e_j -> x`` with ``i < j``.
        """
        shape = self.shape
        idx = np.arange(self.n_sites).reshape(shape)
        look = self._bond_lookup
        rows = []
        for s in range(self.n_sites):
            pos = np.unravel_index(s, shape)
            for i in range(self.dim):
                for j in range(i + 1, self.dim):
                    if pos[i] + 1 >= shape[i] or pos[j] + 1 >= shape[j]:
                        continue
                    pi = list(pos); pi[i] += 1
                    pj = list(pos); pj[j] += 1
                    pij = list(pi); pij[j] += 1
                    x, xi, xj, xij = s, int(idx[tuple(pi)]), int(idx[tuple(pj)]), int(idx[tuple(pij)])
                    rows.append((look[(x, xi)], look[(xi, xij)], look[(xj, xij)], look[(x, xj)]))
        return np.array(rows, dtype=np.int64).reshape(-1, 4)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        s = self.sites
        return np.any((s == np.array(self.lo)) | (s == np.array(self.hi)), axis=1)

    @cached_property
    def boundary_sites(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @cached_property
    def incidence(self) -> np.ndarray:
        """Dense ``(n_bonds, n_sites)`` matrix of the gradient ``d``."""
        d = np.zeros((self.n_bonds, self.n_sites))
        b = np.arange(self.n_bonds)
        d[b, self.bonds[:, 0]] = 1.0
        d[b, self.bonds[:, 1]] = -1.0
        return d

    # -- whole-field operators ---------------------------------------------
    def grad(self, phi: np.ndarray) -> np.ndarray:
        phi = self._check_scalar(phi)
        return phi[self.bonds[:, 0]] - phi[self.bonds[:, 1]]

    def div(self, A: np.ndarray) -> np.ndarray:
        A = np.asarray(A)
        if A.shape[-1] != self.n_bonds:
            raise LatticeError(f"bond field has {A.shape[-1]} entries, lattice has {self.n_bonds} bonds")
        # d* = -d^T with d the incidence matrix
        return -(A @ self.incidence)

    def laplacian(self, phi: np.ndarray) -> np.ndarray:
        """Open-boundary Laplacian ``d* d`` of a site field."""
        return self.div(self.grad(phi))

    def laplacian_periodic(self, phi: np.ndarray) -> np.ndarray:
        """Extended Laplacian: the stencil with periodic wrap-around."""
        if not self.is_symmetric:
            raise UnsupportedGeometryError("extended Laplacian needs a symmetric lattice")
        g = self._check_scalar(phi).reshape(self.shape)
        out = -2 * self.dim * g
        for ax in range(self.dim):
            out = out + np.roll(g, 1, axis=ax) + np.roll(g, -1, axis=ax)
        return out.ravel()

    def boundary_correction(self, phi: np.ndarray) -> np.ndarray:
        """``Delta~ phi - Delta phi``: summed wrapped-neighbour differences.

        Zero at interior sites.  At a boundary site it is
        ``sum over missing directions of (phi_wrapped - phi_x)``.
        """
        return self.laplacian_periodic(phi) - self.laplacian(phi)

    def _check_scalar(self, phi) -> np.ndarray:
        phi = np.asarray(phi)
        if phi.shape[-1:] != (self.n_sites,):
            raise LatticeError(f"scalar field has shape {phi.shape}, lattice has {self.n_sites} sites")
        return phi


class Enumeration(NamedTuple):
    sites: np.ndarray
    bonds: np.ndarray
    plaquettes: np.ndarray
    boundary_sites: np.ndarray


def enumerate_lattice(spec: LatticeSpec) -> Enumeration:
    return Enumeration(spec.sites, spec.bonds, spec.plaquettes, spec.boundary_sites)


def gradient(spec: LatticeSpec, phi: np.ndarray, bond) -> float:
    """``phi_x - phi_y`` for the bond ``(x, y)`` given as a pair of coordinates."""
    x, y = bond
    spec.bond_index(x, y)
    return float(phi[spec.index(x)] - phi[spec.index(y)])


def divergence(spec: LatticeSpec, A: np.ndarray, x) -> float:
    return float(spec.div(A)[spec.index(x)])


def laplacian_open(spec: LatticeSpec, phi: np.ndarray, x) -> float:
    return float(spec.laplacian(phi)[spec.index(x)])


def laplacian_extended(spec: LatticeSpec, phi: np.ndarray, x) -> float:
    return float(spec.laplacian_periodic(phi)[spec.index(x)])
