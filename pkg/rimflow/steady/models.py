from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from rimflow.spectral.models import SpectralField

STEADY_HEADER = ["delta", "residual", "newton_iters", "min_h"]
REDUCED_F_HEADER = ["a", "delta", "f"]


class SteadyResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    field: SpectralField
    residual_norm: float = Field(ge=0.0)
    newton_iters: int = Field(ge=0)
    delta: float = Field(ge=0.0)
    min_h: float

    def row(self):
        return (self.delta, self.residual_norm, self.newton_iters, self.min_h)


class ReducedSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    delta: float
    f: float
    w_residual: float = Field(ge=0.0)
    newton_iters: int = Field(ge=0)

    def row(self):
        return (self.a, self.delta, self.f)
