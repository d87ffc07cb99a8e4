"""Tests for step-size recovery."""

from __future__ import annotations

import pytest

from rimflow.common.errors import Rupture, StepRejected
from rimflow.common.retry import RetryConfig, regrow, retry_step


def _accept_below(limit: float):
    calls = []

    def fn(dt: float) -> float:
        calls.append(dt)
        if dt > limit:
            raise StepRejected(dt, limit, dt)
        return 2.0 * dt

    return fn, calls


class TestRetryStep:
    """retry_step halves until accepted."""

    def test_first_attempt_accepted(self):
        """No rejection leaves dt unchanged."""
        fn, calls = _accept_below(1.0)
        assert retry_step(fn, 0.5, RetryConfig()) == (1.0, 0.5)
        assert calls == [0.5]

    def test_halves_until_accepted(self):
        """Two rejections return the result for dt/4."""
        fn, calls = _accept_below(0.3)
        result, used = retry_step(fn, 1.0, RetryConfig())
        assert used == 0.25
        assert result == 0.5
        assert calls == [1.0, 0.5, 0.25]

    def test_retries_exhausted(self):
        """The last rejection propagates."""
        fn, calls = _accept_below(1e-3)
        with pytest.raises(StepRejected):
            retry_step(fn, 1.0, RetryConfig(retries=3))
        assert len(calls) == 4

    def test_dt_floor(self):
        """Shrinking below dt_min stops the retries."""
        fn, calls = _accept_below(0.0)
        with pytest.raises(StepRejected):
            retry_step(fn, 1.0, RetryConfig(retries=100, dt_min=0.1))
        assert min(calls) >= 0.1

    def test_other_errors_pass_through(self):
        """Only the configured exception types trigger a retry."""

        def fn(dt: float) -> float:
            raise Rupture(0.0, 1.0)

        with pytest.raises(Rupture):
            retry_step(fn, 1.0, RetryConfig())


class TestRegrow:
    """Step recovery after rejections."""

    def test_grows_towards_target(self):
        """dt doubles but never exceeds the base step."""
        cfg = RetryConfig()
        assert regrow(0.25, 1.0, cfg) == 0.5
        assert regrow(0.75, 1.0, cfg) == 1.0
