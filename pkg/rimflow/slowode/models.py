from __future__ import annotations

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

SLOW_ODE_HEADER = ["tau", "re_a1", "im_a1", "b"]


class ManifoldPoint(BaseModel):
    """Point m + a1 e^{i theta} + conj(a1) e^{-i theta} + b cos(zeta) of the slow manifold."""

    model_config = ConfigDict(frozen=True)

    a1: complex = 0j
    b: float = 0.0
    m: float = Field(default=1.0, gt=0.0)

    def margin(self) -> float:
        """m - 2|a1| - |b|; positive exactly when the film height is positive."""
        return self.m - 2.0 * abs(self.a1) - abs(self.b)

    def is_valid(self, margin: float = 0.0) -> bool:
        return self.margin() > margin * self.m

    def rotated(self, phi: float) -> "ManifoldPoint":
        return self.model_copy(update={"a1": self.a1 * complex(np.cos(phi), np.sin(phi))})

    def as_vector(self) -> np.ndarray:
        return np.array([self.a1.real, self.a1.imag, self.b])

    @classmethod
    def from_vector(cls, y: np.ndarray, m: float) -> "ManifoldPoint":
        return cls(a1=complex(y[0], y[1]), b=float(y[2]), m=m)


class OdeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: int = Field(default=16, ge=8)
    L: int = Field(default=16, ge=8)
    tau_end: float = Field(default=2.0, gt=0.0)
    dtau: float = Field(default=1e-2, gt=0.0)
    tol: Optional[float] = Field(default=1e-8, gt=0.0, description="step-halving tolerance; None for fixed steps")
    margin: float = Field(default=0.0, ge=0.0, lt=1.0, description="required positivity margin as a fraction of m")


class OdeStopReason(str, Enum):
    COMPLETED = "completed"
    VALIDITY_EXIT = "validity_exit"
    FAILED = "failed"


class OdeRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float
    a1: complex
    b: float

    def row(self) -> Tuple[float, float, float, float]:
        return (self.tau, self.a1.real, self.a1.imag, self.b)


class OdeTrajectory(BaseModel):
    x0: ManifoldPoint
    gamma: float
    records: List[OdeRecord] = Field(default_factory=list)
    reason: OdeStopReason = OdeStopReason.COMPLETED
    message: str = ""
    accepted: int = 0
    rejected: int = 0

    def tau(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])

    def a1(self) -> np.ndarray:
        return np.array([r.a1 for r in self.records], dtype=complex)

    def b(self) -> np.ndarray:
        return np.array([r.b for r in self.records])

    def at(self, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Linear interpolation of (a1, b) at the given slow times."""
        t = self.tau()
        a1 = self.a1()
        re = np.interp(tau, t, a1.real)
        im = np.interp(tau, t, a1.imag)
        return re + 1j * im, np.interp(tau, t, self.b())


class PortraitEntry(BaseModel):
    index: int
    re_a1: float
    im_a1: float
    b: float
    reason: OdeStopReason
    message: str
    accepted: int
    rejected: int
    tau_last: float
    csv: str


class PortraitIndex(BaseModel):
    preset: str
    gamma: float
    m: float
    entries: List[PortraitEntry] = Field(default_factory=list)
    snapshot_taus: List[float] = Field(default_factory=list, description="fig6 cross-section times")
