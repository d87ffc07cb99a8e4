from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Type, TypeVar

from rimflow.common.errors import StepRejected

logger = logging.getLogger("retry")

T = TypeVar("T")


@dataclass
class RetryConfig:
    retries: int = 40
    shrink: float = 0.5
    grow: float = 2.0
    dt_min: float = 1e-12


def retry_step(
    fn: Callable[[float], T],
    dt: float,
    cfg: RetryConfig,
    retry_on: Tuple[Type[BaseException], ...] = (StepRejected,),
) -> Tuple[T, float]:
    """
    Run fn(dt), shrinking dt after every rejection:
      - returns (result, dt actually used)
      - re-raises the last rejection once retries or dt_min are exhausted
    """
    attempt = 0
    last_exc: Optional[BaseException] = None

    while attempt <= cfg.retries:
        try:
            return fn(dt), dt
        except retry_on as e:
            last_exc = e
            attempt += 1
            if attempt > cfg.retries:
                break
            dt *= cfg.shrink
            if dt < cfg.dt_min:
                logger.warning("dt floor %.3e reached after %d rejections", cfg.dt_min, attempt)
                break
            logger.debug("rejected (%s); retrying with dt=%.3e", e, dt)

    raise last_exc if last_exc else RuntimeError("retry_step failed")


def regrow(dt: float, target: float, cfg: RetryConfig) -> float:
    return min(target, dt * cfg.grow)
