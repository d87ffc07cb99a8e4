from __future__ import annotations

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"


class Measurement(BaseModel):
    """What a check observed; the runner adds name, status and timing."""

    measured: float
    expected: float
    tolerance: float
    ok: bool
    detail: str = ""


class CheckResult(BaseModel):
    name: str
    status: CheckStatus
    measured: Optional[float] = None
    expected: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""
    seconds: float = Field(default=0.0, ge=0.0)


class VerifyReport(BaseModel):
    seed: int
    quick: bool
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.status == CheckStatus.PASS for c in self.checks)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if c.status != CheckStatus.PASS]
