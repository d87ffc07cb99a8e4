from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rimflow.spectral.models import Params

SPECTRUM_HEADER = ["re", "im", "k_dominant", "l_dominant", "residual"]

# |Re lambda| below this counts as critical
CRITICAL_BAND = 1e-8


class Stability(str, Enum):
    STABLE = "stable"
    CRITICAL = "critical"
    UNSTABLE = "unstable"


def classify(value: complex, band: float = CRITICAL_BAND) -> Stability:
    if abs(value.real) < band:
        return Stability.CRITICAL
    return Stability.UNSTABLE if value.real > 0 else Stability.STABLE


class EigenEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: complex
    mode: Tuple[int, int]
    residual: float = Field(ge=0.0)

    @property
    def stability(self) -> Stability:
        return classify(self.value)

    def row(self):
        return (self.value.real, self.value.imag, self.mode[0], self.mode[1], self.residual)


class SpectrumReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    eigenvalues: List[EigenEntry]
    classification: Dict[Stability, int]
    params: Optional[Params] = None
    frame: str = "lab"

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.eigenvalues], dtype=complex)

    def nearest(self, target: complex) -> EigenEntry:
        return min(self.eigenvalues, key=lambda e: abs(e.value - target))

    def count(self, kind: Stability) -> int:
        return self.classification.get(kind, 0)
