from __future__ import annotations

import math

import numpy as np
import pytest

from rimflow.spectral.models import Params


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def critical_params() -> Params:
    """m = gamma = 1 at the critical length ell = pi, no gravity."""
    return Params(gamma=1.0, delta=0.0, ell=math.pi, mass=1.0)


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("RIMFLOW_THREADS", "1")
