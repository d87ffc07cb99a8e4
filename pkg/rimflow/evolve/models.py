from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rimflow.spectral.models import SpectralField

TRAJECTORY_HEADER = ["t", "mass", "energy", "min_h", "dist_M", "re_a1", "im_a1", "b"]


class Frame(str, Enum):
    LAB = "lab"
    COMOVING = "comoving"


class StopReason(str, Enum):
    COMPLETED = "completed"
    RUPTURE = "rupture"
    BLOWUP = "blowup"
    STEP_COLLAPSE = "step_collapse"


class EvolveConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default=1e-2, gt=0.0)
    t_end: float = Field(default=1.0, gt=0.0)
    frame: Frame = Frame.COMOVING
    rupture_eps: float = Field(default=1e-3, gt=0.0)
    blowup_H4: float = Field(default=1e6, gt=0.0)
    snapshot_every: int = Field(default=0, ge=0)
    sample_every: int = Field(default=1, ge=1)
    tol: float = Field(default=1e-7, gt=0.0, description="relative step-doubling tolerance")
    energy_slack: float = Field(default=1e-10, ge=0.0, description="energy rise counted as an increase")
    max_steps: int = Field(default=10_000_000, ge=1)


class TrajectoryRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    mass: float
    energy: float
    min_h: float
    dist_M: float
    a1: complex
    b: float

    def row(self) -> Tuple[float, ...]:
        return (self.t, self.mass, self.energy, self.min_h, self.dist_M, self.a1.real, self.a1.imag, self.b)


class Snapshot(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int
    t: float
    field: SpectralField


class Trajectory(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    records: List[TrajectoryRecord] = Field(default_factory=list)
    reason: StopReason = StopReason.COMPLETED
    message: str = ""
    accepted: int = 0
    rejected: int = 0
    energy_increases: int = 0
    final: Optional[SpectralField] = None
    snapshots: List[Snapshot] = Field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        if name == "re_a1":
            return np.array([r.a1.real for r in self.records])
        if name == "im_a1":
            return np.array([r.a1.imag for r in self.records])
        if name == "abs_a1":
            return np.array([abs(r.a1) for r in self.records])
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def columns(self) -> Dict[str, np.ndarray]:
        return {name: self.column(name) for name in TRAJECTORY_HEADER}
