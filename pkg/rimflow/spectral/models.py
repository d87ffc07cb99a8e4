from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rimflow.common.errors import SymmetryError

# relative conjugacy defect tolerated on construction of a real field
REALITY_TOL = 1e-10


@dataclass(frozen=True)
class Lattice:
    """
    Half lattice of stored modes k in [-K, K], l in [0, L] on the torus.

    Coefficient arrays have shape (..., 2K+1, L+1) with index [k+K, l];
    leading axes are batch axes. Modes with l < 0 are implied by
    c(k, -l) = c(k, l). Products are formed on a (4K+2) x (4L+2) grid,
    which resolves every product of up to three bandwidth-K factors
    without aliasing into the stored modes.
    """

    K: int
    L: int
    ell: float

    @property
    def shape(self) -> Tuple[int, int]:
        return (2 * self.K + 1, self.L + 1)

    @property
    def size(self) -> int:
        return (2 * self.K + 1) * (self.L + 1)

    @property
    def scale(self) -> float:
        return math.pi / self.ell

    @property
    def n_theta(self) -> int:
        return 4 * self.K + 2

    @property
    def n_zeta(self) -> int:
        return 4 * self.L + 2

    @cached_property
    def k(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1, dtype=float)[:, None]

    @cached_property
    def l(self) -> np.ndarray:
        return np.arange(0, self.L + 1, dtype=float)[None, :]

    @cached_property
    def l_full(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1, dtype=float)[None, :]

    @cached_property
    def q2(self) -> np.ndarray:
        return self.k**2 + (self.scale * self.l) ** 2

    @cached_property
    def q2_full(self) -> np.ndarray:
        return self.k**2 + (self.scale * self.l_full) ** 2

    @cached_property
    def theta(self) -> np.ndarray:
        """Collocation angles theta_j, shaped (n_theta, 1) to broadcast over zeta."""
        return (2.0 * math.pi * np.arange(self.n_theta) / self.n_theta)[:, None]

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """Number of full-lattice modes each stored mode stands for."""
        w = np.full(self.shape, 2.0)
        w[:, 0] = 1.0
        return w

    def index(self, k: int, l: int) -> Tuple[int, int]:
        if abs(k) > self.K or abs(l) > self.L:
            raise IndexError(f"mode ({k},{l}) outside lattice K={self.K}, L={self.L}")
        return (k + self.K, abs(l))

    def is_critical_length(self) -> bool:
        return math.isclose(self.ell, math.pi, rel_tol=1e-9)

    def same_as(self, other: "Lattice") -> bool:
        return self.K == other.K and self.L == other.L and math.isclose(self.ell, other.ell, rel_tol=1e-14)


@lru_cache(maxsize=64)
def get_lattice(K: int, L: int, ell: float) -> Lattice:
    return Lattice(K=int(K), L=int(L), ell=float(ell))


def conjugacy_defect(coeffs: np.ndarray, scale: float = 0.0) -> float:
    """max |c(k,l) - conj c(-k,l)| relative to max(max |c|, scale)."""
    scale = max(float(np.max(np.abs(coeffs))) if coeffs.size else 0.0, scale)
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - np.conj(coeffs[..., ::-1, :])))) / scale


class Params(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0.0, description="rescaled surface tension")
    delta: float = Field(ge=0.0, description="gravity parameter")
    ell: float = Field(gt=0.0, description="cylinder aspect ratio")
    mass: float = Field(gt=0.0, description="mean film height m")

    def with_delta(self, delta: float) -> "Params":
        return self.model_copy(update={"delta": float(delta)})


class SpectralField(BaseModel):
    """
    Truncated Fourier representation of an even-in-zeta field.

    real=True enforces c(-k, l) = conj c(k, l); complex fields such as
    G1 switch it off and keep only evenness, which is structural.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coeffs: np.ndarray
    K: int = Field(ge=2)
    L: int = Field(ge=2)
    ell: float = Field(gt=0.0)
    real: bool = True

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_complex(cls, v: np.ndarray) -> np.ndarray:
        return np.array(v, dtype=complex, copy=True)

    @model_validator(mode="after")
    def _check(self) -> "SpectralField":
        expected = (2 * self.K + 1, self.L + 1)
        if self.coeffs.shape != expected:
            raise ValueError(f"coeffs must have shape {expected}, got {self.coeffs.shape}")
        if self.real:
            defect = conjugacy_defect(self.coeffs)
            if defect > REALITY_TOL:
                raise SymmetryError(f"reality violated: relative conjugacy defect {defect:.3e}")
        self.coeffs.setflags(write=False)
        return self

    @classmethod
    def wrap(cls, coeffs: np.ndarray, lattice: Lattice, real: bool = True) -> "SpectralField":
        return cls(
            coeffs=coeffs,
            K=lattice.K,
            L=lattice.L,
            ell=lattice.ell,
            real=real,
        )

    @property
    def lattice(self) -> Lattice:
        return get_lattice(self.K, self.L, self.ell)

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.K, 0].real)

    def coeff(self, k: int, l: int) -> complex:
        return complex(self.coeffs[self.lattice.index(k, l)])

    def like(self, coeffs: np.ndarray, real: Optional[bool] = None) -> "SpectralField":
        return SpectralField.wrap(coeffs, self.lattice, self.real if real is None else real)

    def _check_compatible(self, other: "SpectralField") -> None:
        if not self.lattice.same_as(other.lattice):
            raise ValueError(
                f"lattice mismatch: (K={self.K}, L={self.L}, ell={self.ell}) vs "
                f"(K={other.K}, L={other.L}, ell={other.ell})"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.like(self.coeffs + other.coeffs, real=self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.like(self.coeffs - other.coeffs, real=self.real and other.real)

    def __neg__(self) -> "SpectralField":
        return self.like(-self.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        real = self.real and complex(scalar).imag == 0.0
        return self.like(self.coeffs * scalar, real=real)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        kind = "real" if self.real else "complex"
        return f"SpectralField(K={self.K}, L={self.L}, ell={self.ell:.6g}, {kind}, mean={self.mean:.6g})"


class GridField(BaseModel):
    """Collocation values on the uniform n_theta x n_zeta grid of the torus."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "GridField":
        if self.values.ndim != 2:
            raise ValueError(f"grid values must be 2D, got shape {self.values.shape}")
        n1, n2 = self.values.shape
        if n1 % 2 or n2 % 2:
            raise ValueError(f"grid sizes must be even, got {n1}x{n2}")
        if np.iscomplexobj(self.values):
            raise ValueError("grid values must be real")
        return self

    @property
    def n_theta(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_zeta(self) -> int:
        return int(self.values.shape[1])

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def dzeta(self) -> float:
        return 2.0 * math.pi / self.n_zeta

    @classmethod
    def sample(cls, fn, n_theta: int, n_zeta: int) -> "GridField":
        theta, zeta = grid_points(n_theta, n_zeta)
        return cls(values=np.asarray(fn(theta, zeta), dtype=float) * np.ones((n_theta, n_zeta)))


def grid_points(n_theta: int, n_zeta: int) -> Tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    zeta = 2.0 * math.pi * np.arange(n_zeta) / n_zeta
    return np.meshgrid(theta, zeta, indexing="ij")
