"""Exact many-body treatment of lattice electrons in a fixed gauge background.

Basis and sign convention
-------------------------
Modes are numbered site-major, spin-minor: ``m = 2 * site + spin`` with
``spin = 0`` for up and ``1`` for down, and ``site`` the lattice index.  A
Fock basis state is the integer whose bit ``m`` is the occupation of mode
``m``.  Operators act with the Jordan-Wigner sign
``c_m^dagger |s> = (-1)^{#occupied modes below m} |s + 2^m>``.

The Hamiltonian is

    H(A) = sum_{<x,y>} sum_{s,s'} [t^{ss'}_{xy} e^{i A_{xy}} c^+_{xs} c_{ys'} + h.c.]
           + U sum_x n_{x up} n_{x dn} + V sum_{<x,y>} n_x n_y

and the grand-canonical version subtracts ``mu * N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logsumexp

from . import _kernels
from .gauge import GaugeConfig
from .lattice import LatticeError, LatticeSpec

__all__ = [
    "UP",
    "DOWN",
    "CapacityError",
    "NumericError",
    "UnsupportedModelError",
    "FermionModel",
    "FockSpace",
    "build_mode_operators",
    "build_hamiltonian",
    "cooper_operator",
    "thermal_expectation",
    "log_partition",
    "wick_oracle",
    "FermionSystem",
]

UP, DOWN = 0, 1
DEFAULT_DIM_CAP = 4096


class CapacityError(RuntimeError):
    """Fock space larger than the configured cap."""


class NumericError(ArithmeticError):
    pass


class UnsupportedModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FermionModel:
    """Nearest-neighbour hopping with on-site and nearest-neighbour density terms.

    Parameters
    ----------
    t : float
        Default hopping; the amplitude on every bond is ``-t`` for equal
        spins and zero otherwise.
    U : float
        Coefficient of ``n_up n_dn`` (attractive for ``U < 0``).
    V : float
        Coefficient of ``n_x n_y`` on nearest-neighbour pairs.
    mu : float
        Chemical potential.
    hopping : array, optional
        Per-bond amplitudes overriding ``t``: shape ``(n_bonds,)`` for
        spin-diagonal hopping or ``(n_bonds, 2, 2)`` for a general spin
        structure ``t^{s s'}_{x, x+e}``.
    t0, W0 : float, optional
        Uniform caps on hopping and interaction magnitudes.
    """

    t: float = 1.0
    U: float = 0.0
    V: float = 0.0
    mu: float = 0.0
    hopping: np.ndarray | None = None
    t0: float | None = None
    W0: float | None = None

    def __post_init__(self):
        if self.hopping is not None:
            h = np.asarray(self.hopping, dtype=complex)
            if h.ndim not in (1, 3) or (h.ndim == 3 and h.shape[1:] != (2, 2)):
                raise ValueError(f"hopping must have shape (n_bonds,) or (n_bonds, 2, 2), got {h.shape}")
            object.__setattr__(self, "hopping", h)
        tmax = abs(self.t) if self.hopping is None else float(np.abs(self.hopping).max(initial=0.0))
        if self.t0 is not None and tmax > self.t0:
            raise ValueError(f"hopping magnitude {tmax} exceeds t0={self.t0}")
        if self.W0 is not None and max(abs(self.U), abs(self.V)) > self.W0:
            raise ValueError(f"interaction magnitude exceeds W0={self.W0}")

    @property
    def spin_diagonal(self) -> bool:
        return self.hopping is None or self.hopping.ndim == 1 or not (
            np.any(self.hopping[:, 0, 1]) or np.any(self.hopping[:, 1, 0]))

    @property
    def is_free(self) -> bool:
        return self.U == 0 and self.V == 0

    @property
    def has_hopping(self) -> bool:
        return bool(np.any(self.amplitudes_raw()))

    def amplitudes_raw(self):
        return -self.t if self.hopping is None else self.hopping

    def amplitudes(self, lattice: LatticeSpec) -> np.ndarray:
        """Spin matrices ``t^{s s'}`` for each canonical bond, shape ``(n_bonds, 2, 2)``."""
        nb = lattice.n_bonds
        if self.hopping is None:
            return np.broadcast_to(-self.t * np.eye(2, dtype=complex), (nb, 2, 2)).copy()
        if self.hopping.shape[0] != nb:
            raise LatticeError(f"model has {self.hopping.shape[0]} bond amplitudes, lattice has {nb} bonds")
        if self.hopping.ndim == 1:
            return self.hopping[:, None, None] * np.eye(2)
        return self.hopping.copy()


class FockSpace:
    """Occupation-number basis for ``n_sites`` spin-1/2 sites."""

    def __init__(self, n_sites: int, cap: int = DEFAULT_DIM_CAP):
        self.n_sites = int(n_sites)
        self.n_modes = 2 * self.n_sites
        self.dim = 1 << self.n_modes
        if self.dim > cap:
            raise CapacityError(f"Fock dimension 4^{self.n_sites} = {self.dim} exceeds cap {cap}")

    @staticmethod
    def mode(site: int, spin: int) -> int:
        return 2 * site + spin

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, n_modes)`` 0/1 table."""
        s = np.arange(self.dim)[:, None]
        return ((s >> np.arange(self.n_modes)) & 1).astype(np.int8)

    @cached_property
    def site_density(self) -> np.ndarray:
        """``(dim, n_sites)`` total occupation per site."""
        occ = self.occupations
        return (occ[:, 0::2] + occ[:, 1::2]).astype(float)

    @cached_property
    def total_number(self) -> np.ndarray:
        return self.occupations.sum(axis=1).astype(float)

    def hopping(self, a: int, b: int) -> sp.csr_matrix:
        """``c_a^dagger c_b`` as a sparse matrix."""
        rows, cols, signs = _kernels.hopping_entries(self.dim, a, b)
        return sp.csr_matrix((signs, (rows, cols)), shape=(self.dim, self.dim))

    def creation(self, m: int) -> sp.csr_matrix:
        s = np.arange(self.dim)
        free = ((s >> m) & 1) == 0
        cols = s[free]
        signs = 1.0 - 2.0 * (np.bitwise_count(cols & ((1 << m) - 1)) & 1)
        return sp.csr_matrix((signs, (cols | (1 << m), cols)), shape=(self.dim, self.dim))

    def annihilation(self, m: int) -> sp.csr_matrix:
        return self.creation(m).T.tocsr()

    def gamma_diagonal(self, phi: np.ndarray) -> np.ndarray:
        """Diagonal of ``Gamma(phi) = prod exp(-phi_x n_{x,s})``."""
        return np.exp(-self.site_density @ np.asarray(phi, dtype=float))

    def gauge_phase_diagonal(self, chi: np.ndarray) -> np.ndarray:
        """Diagonal of ``G(chi) = prod exp(i chi_x n_{x,s})``."""
        return np.exp(1j * (self.site_density @ np.asarray(chi, dtype=float)))


@dataclass
class ModeOperators:
    space: FockSpace
    create: list = field(default_factory=list)
    annihilate: list = field(default_factory=list)

    def c_dag(self, site: int, spin: int):
        return self.create[FockSpace.mode(site, spin)]

    def c(self, site: int, spin: int):
        return self.annihilate[FockSpace.mode(site, spin)]


def build_mode_operators(lattice: LatticeSpec, cap: int = DEFAULT_DIM_CAP) -> ModeOperators:
    space = FockSpace(lattice.n_sites, cap)
    ops = ModeOperators(space)
    for m in range(space.n_modes):
        cd = space.creation(m)
        ops.create.append(cd)
        ops.annihilate.append(cd.T.tocsr())
    return ops


def _bond_values(A, lattice):
    if isinstance(A, GaugeConfig):
        return A.lattice, A.angles
    if lattice is None:
        raise TypeError("lattice is required when A is a plain array")
    a = np.asarray(A)
    if a.shape != (lattice.n_bonds,):
        raise LatticeError(f"expected {lattice.n_bonds} bond values, got shape {a.shape}")
    return lattice, a


def diagonal_energy(space: FockSpace, lattice: LatticeSpec, model: FermionModel,
                    grand: bool = False) -> np.ndarray:
    occ = space.occupations
    e = model.U * (occ[:, 0::2] * occ[:, 1::2]).sum(axis=1).astype(float)
    if model.V:
        n = space.site_density
        e = e + model.V * (n[:, lattice.bonds[:, 0]] * n[:, lattice.bonds[:, 1]]).sum(axis=1)
    if grand:
        e = e - model.mu * space.total_number
    return e


def build_hamiltonian(model: FermionModel, A, lattice: LatticeSpec | None = None, *,
                      grand: bool = False, cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """Dense ``H(A)`` (or ``H(A) - mu N`` with ``grand=True``).

    ``A`` is a :class:`GaugeConfig` or an array of bond values; complex values
    are allowed and give the non-Hermitian operator of a complex shift.
    """
    lattice, a = _bond_values(A, lattice)
    space = FockSpace(lattice.n_sites, cap)
    amps = model.amplitudes(lattice)
    H = np.diag(diagonal_energy(space, lattice, model, grand).astype(complex))
    ef, eb = np.exp(1j * a), np.exp(-1j * a)
    for b, (x, y, _) in enumerate(lattice.bonds):
        for s in range(2):
            for s2 in range(2):
                t = amps[b, s, s2]
                if t == 0:
                    continue
                rows, cols, signs = _kernels.hopping_entries(space.dim, 2 * x + s, 2 * y + s2)
                H[rows, cols] += t * ef[b] * signs
                H[cols, rows] += np.conj(t) * eb[b] * signs
    return H


def cooper_operator(lattice: LatticeSpec, u, v, cap: int = DEFAULT_DIM_CAP) -> sp.csr_matrix:
    """``c^+_{u up} c^+_{v dn} c_{-v dn} c_{-u up}`` with ``-x`` the reflected site."""
    space = FockSpace(lattice.n_sites, cap)
    iu, iv = lattice.index(u), lattice.index(v)
    imu, imv = lattice.index(lattice.reflect(u)), lattice.index(lattice.reflect(v))
    op = (space.creation(2 * iu + UP) @ space.creation(2 * iv + DOWN)
          @ space.annihilation(2 * imv + DOWN) @ space.annihilation(2 * imu + UP))
    return op.tocsr()


def _check_hermitian(H, tol=1e-10):
    H = np.asarray(H)
    scale = max(np.linalg.norm(H), 1.0)
    if np.linalg.norm(H - H.conj().T) > tol * scale:
        raise NumericError("Hamiltonian is not Hermitian within tolerance")


def log_partition(H, beta: float) -> float:
    """``log Tr exp(-beta H)`` with a ground-state shift."""
    _check_hermitian(H)
    w = np.linalg.eigvalsh(H)
    return float(logsumexp(-beta * w))


def thermal_expectation(op, H, beta: float) -> complex:
    """``Tr(op e^{-beta H}) / Tr e^{-beta H}``."""
    _check_hermitian(H)
    w, V = np.linalg.eigh(H)
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    M = op @ V if sp.issparse(op) else np.asarray(op) @ V
    return complex(np.einsum("ik,ik,k->", V.conj(), M, p))


def one_body_matrix(model: FermionModel, A, lattice: LatticeSpec | None = None,
                    spin: int = UP) -> np.ndarray:
    """Single-particle matrix ``h`` of one spin species, with ``-mu`` on the diagonal."""
    lattice, a = _bond_values(A, lattice)
    if not model.spin_diagonal:
        raise UnsupportedModelError("one-body matrix per spin needs spin-diagonal hopping")
    amps = model.amplitudes(lattice)[:, spin, spin]
    h = -model.mu * np.eye(lattice.n_sites, dtype=complex)
    x, y = lattice.bonds[:, 0], lattice.bonds[:, 1]
    h[x, y] += amps * np.exp(1j * a)
    h[y, x] += np.conj(amps) * np.exp(-1j * a)
    return h


def one_body_correlator(h: np.ndarray, beta: float) -> np.ndarray:
    """``G[a, b] = <c_a^+ c_b>`` for the quadratic Hamiltonian ``sum h_ab c_a^+ c_b``."""
    w, V = np.linalg.eigh(h)
    occ = expit(-beta * w)
    # <c_a^+ c_b> = f(h)_{ba}
    return ((V * occ) @ V.conj().T).T


def wick_oracle(model: FermionModel, A, beta: float, u, v,
                lattice: LatticeSpec | None = None) -> complex:
    """Cooper correlation of a non-interacting model from one-body correlators.

    Moving ``c_{-u up}`` left past ``c_{-v dn}`` and ``c^+_{v dn}`` costs two
    transpositions, so ``c^+_{u up} c^+_{v dn} c_{-v dn} c_{-u up}`` equals
    ``(c^+_{u up} c_{-u up})(c^+_{v dn} c_{-v dn})`` with no sign.  Spin
    sectors decouple, hence the expectation factorizes.
    """
    if not model.is_free:
        raise UnsupportedModelError("Wick factorization needs U = V = 0")
    lattice, a = _bond_values(A, lattice)
    iu, iv = lattice.index(u), lattice.index(v)
    imu, imv = lattice.index(lattice.reflect(u)), lattice.index(lattice.reflect(v))
    g_up = one_body_correlator(one_body_matrix(model, a, lattice, UP), beta)
    g_dn = one_body_correlator(one_body_matrix(model, a, lattice, DOWN), beta)
    return complex(g_up[iu, imu] * g_dn[iv, imv])


class FermionSystem:
    """Block-diagonal evaluator of fermionic traces for many gauge backgrounds.

    States are grouped by conserved numbers ``(N_up, N_dn)`` (or ``N`` for
    spin-mixing hopping).  Blocks of equal size are stacked so one batched
    eigendecomposition handles each size class.  The Hamiltonian used is the
    grand-canonical ``H(A) - mu N``.
    """

    def __init__(self, lattice: LatticeSpec, model: FermionModel, cap: int = DEFAULT_DIM_CAP):
        self.lattice = lattice
        self.model = model
        self.space = space = FockSpace(lattice.n_sites, cap)
        occ = space.occupations
        n_up = occ[:, 0::2].sum(axis=1)
        n_dn = occ[:, 1::2].sum(axis=1)
        labels = n_up * (lattice.n_sites + 1) + n_dn if model.spin_diagonal else n_up + n_dn
        self.labels = labels

        order = np.argsort(labels, kind="stable")
        uniq, starts, sizes = np.unique(labels[order], return_index=True, return_counts=True)
        block_of = np.empty(space.dim, dtype=np.int64)
        local = np.empty(space.dim, dtype=np.int64)
        self.block_states = []
        for k, (s0, n) in enumerate(zip(starts, sizes)):
            st = order[s0:s0 + n]
            self.block_states.append(st)
            block_of[st] = k
            local[st] = np.arange(n)
        self.block_of, self.local = block_of, local

        # size classes, each a stack of blocks laid out contiguously in one flat buffer
        self.group_dims = sorted(set(int(n) for n in sizes))
        self.group_blocks = [[k for k, n in enumerate(sizes) if n == d] for d in self.group_dims]
        group_of_block = np.empty(len(sizes), dtype=np.int64)
        slot_of_block = np.empty(len(sizes), dtype=np.int64)
        self.group_offsets = []
        off = 0
        for g, (d, blks) in enumerate(zip(self.group_dims, self.group_blocks)):
            self.group_offsets.append(off)
            for i, k in enumerate(blks):
                group_of_block[k] = g
                slot_of_block[k] = i
            off += len(blks) * d * d
        self.flat_size = off
        dims = np.array(self.group_dims)
        offs = np.array(self.group_offsets)

        def flat(r, c):
            k = block_of[r]
            if np.any(block_of[c] != k):
                raise NumericError("operator mixes conserved-number blocks")
            g = group_of_block[k]
            d = dims[g]
            return offs[g] + slot_of_block[k] * d * d + local[r] * d + local[c]

        self._flat = flat
        diag = diagonal_energy(space, lattice, model, grand=True)
        s = np.arange(space.dim)
        self.template = np.zeros(self.flat_size, dtype=complex)
        self.template[flat(s, s)] = diag

        amps = model.amplitudes(lattice)
        fwd, bwd, bond, amp = [], [], [], []
        for b, (x, y, _) in enumerate(lattice.bonds):
            for s1 in range(2):
                for s2 in range(2):
                    t = amps[b, s1, s2]
                    if t == 0:
                        continue
                    rows, cols, signs = _kernels.hopping_entries(space.dim, 2 * x + s1, 2 * y + s2)
                    fwd.append(flat(rows, cols))
                    bwd.append(flat(cols, rows))
                    bond.append(np.full(len(rows), b))
                    amp.append(t * signs)
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt)) if fwd else (lambda xs, dt: np.zeros(0, dt))
        self.fwd = cat(fwd, np.int64)
        self.bwd = cat(bwd, np.int64)
        self.bond = cat(bond, np.int64)
        self.amp = cat(amp, complex)

    @property
    def dim(self) -> int:
        return self.space.dim

    def stacked(self, angles) -> list[np.ndarray]:
        """Per size class, the stacked blocks of ``H(A) - mu N``."""
        a = np.asarray(angles)
        buf = self.template.copy()
        _kernels.fill_hopping(buf, self.fwd, self.bwd, self.bond, self.amp,
                              np.exp(1j * a).astype(complex), np.exp(-1j * a).astype(complex))
        return [buf[o:o + len(blks) * d * d].reshape(len(blks), d, d)
                for o, d, blks in zip(self.group_offsets, self.group_dims, self.group_blocks)]

    def dense(self, angles) -> np.ndarray:
        """Full matrix in the original Fock basis (for testing)."""
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for stack, blks in zip(self.stacked(angles), self.group_blocks):
            for blk, k in zip(stack, blks):
                st = self.block_states[k]
                H[np.ix_(st, st)] = blk
        return H

    def eig(self, angles) -> list[tuple[np.ndarray, np.ndarray]]:
        return [np.linalg.eigh(m) for m in self.stacked(angles)]

    def observable_blocks(self, op) -> list[np.ndarray]:
        """Stack a block-diagonal operator the same way as the Hamiltonian."""
        op = sp.coo_matrix(op)
        buf = np.zeros(self.flat_size, dtype=complex)
        if op.nnz:
            np.add.at(buf, self._flat(op.row, op.col), op.data)
        return [buf[o:o + len(blks) * d * d].reshape(len(blks), d, d)
                for o, d, blks in zip(self.group_offsets, self.group_dims, self.group_blocks)]

    def thermal(self, eig, beta: float, observables=()) -> tuple[float, list[complex]]:
        """``(log Z_f, [<O>])`` at fixed gauge field from a cached decomposition."""
        if beta == 0:
            # plain normalized traces: exact zeros for off-diagonal operators
            vals = [complex(sum(np.trace(O, axis1=1, axis2=2).sum() for O in obs) / self.dim)
                    for obs in observables]
            return float(np.log(self.dim)), vals
        shift = min(w.min() for w, _ in eig)
        weights = [np.exp(-beta * (w - shift)) for w, _ in eig]
        z = sum(float(p.sum()) for p in weights)
        logz = float(np.log(z) - beta * shift)
        vals = []
        for obs in observables:
            acc = 0.0
            for (w, V), p, O in zip(eig, weights, obs):
                diag = np.einsum("bik,bik->bk", V.conj(), O @ V)
                acc = acc + np.sum(diag * p)
            vals.append(complex(acc / z))
        return logz, vals

    def log_trace(self, angles, beta: float) -> float:
        if beta == 0:
            return float(np.log(self.dim))
        ws = np.concatenate([np.linalg.eigvalsh(m).ravel() for m in self.stacked(angles)])
        return float(logsumexp(-beta * ws))
