"""Classical compact U(1) gauge configurations and their energy.

The gauge energy is

    E_g(A) = -kappa * sum_p cos B_p - (1/alpha) * sum_x cos (d* A)_x

with plaquette fluxes ``B_p`` and the open-boundary divergence ``d* A``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeError, LatticeSpec

__all__ = [
    "CouplingError",
    "GaugeCouplings",
    "GaugeConfig",
    "wrap_angle",
    "plaquette_flux",
    "gauge_energy",
    "gauge_transform",
    "pure_gauge",
]


class CouplingError(ValueError):
    pass


def wrap_angle(theta):
    """Map angles to the representative in ``(-pi, pi]``."""
    return -(np.remainder(-np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi)


@dataclass(frozen=True)
class GaugeCouplings:
    kappa: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    flux_frozen: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise CouplingError(f"alpha must be > 0, got {self.alpha}")
        if not self.kappa >= 0:
            raise CouplingError(f"kappa must be >= 0, got {self.kappa}")
        if not self.beta >= 0:
            raise CouplingError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True, eq=False)
class GaugeConfig:
    """One angle per canonical bond, stored wrapped to ``(-pi, pi]``."""

    lattice: LatticeSpec
    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if a.shape != (self.lattice.n_bonds,):
            raise LatticeError(f"expected {self.lattice.n_bonds} bond angles, got shape {a.shape}")
        a = wrap_angle(a)
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @classmethod
    def zero(cls, lattice: LatticeSpec) -> "GaugeConfig":
        return cls(lattice, np.zeros(lattice.n_bonds))

    @classmethod
    def random(cls, lattice: LatticeSpec, rng: np.random.Generator) -> "GaugeConfig":
        return cls(lattice, rng.uniform(-np.pi, np.pi, lattice.n_bonds))

    def value(self, x, y) -> float:
        """``A_{x,y}`` for neighbouring sites, antisymmetric in ``(x, y)``."""
        b, sign = self.lattice.bond_index(x, y)
        return sign * float(self.angles[b])

    def to_list(self) -> list[float]:
        return [float(a) for a in self.angles]


def _angles(A) -> np.ndarray:
    return A.angles if isinstance(A, GaugeConfig) else np.asarray(A)


def fluxes(lattice: LatticeSpec, angles: np.ndarray) -> np.ndarray:
    """Unwrapped oriented plaquette sums; works on stacked or complex inputs."""
    P = lattice.plaquettes
    a = np.asarray(angles)
    return a[..., P[:, 0]] + a[..., P[:, 1]] - a[..., P[:, 2]] - a[..., P[:, 3]]


def plaquette_flux(A: GaugeConfig, p: int | None = None):
    """Flux through plaquette ``p`` (all plaquettes if ``p`` is None), in ``(-pi, pi]``."""
    B = wrap_angle(fluxes(A.lattice, A.angles))
    return B if p is None else float(B[p])


def gauge_energy(A, couplings: GaugeCouplings, lattice: LatticeSpec | None = None):
    """Gauge plus gauge-fixing energy.  Accepts stacked angle arrays ``(..., n_bonds)``."""
    lattice = A.lattice if isinstance(A, GaugeConfig) else lattice
    a = _angles(A)
    e = -(1.0 / couplings.alpha) * np.cos(lattice.div(a)).sum(axis=-1)
    if len(lattice.plaquettes):
        e = e - couplings.kappa * np.cos(fluxes(lattice, a)).sum(axis=-1)
    return e


def gauge_energy_floor(lattice: LatticeSpec, couplings: GaugeCouplings) -> float:
    return -couplings.kappa * len(lattice.plaquettes) - lattice.n_sites / couplings.alpha


def gauge_transform(A: GaugeConfig, chi: np.ndarray) -> GaugeConfig:
    """``A_b -> A_b + (d chi)_b``, rewrapped."""
    return GaugeConfig(A.lattice, A.angles + A.lattice.grad(chi))


def pure_gauge(lattice: LatticeSpec, chi: np.ndarray) -> GaugeConfig:
    """Flux-free configuration ``A = d chi`` (the kappa -> infinity sector)."""
    return GaugeConfig(lattice, lattice.grad(chi))
