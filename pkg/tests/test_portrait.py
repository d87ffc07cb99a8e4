"""Tests for phase-portrait presets and cross-section geometry."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from rimflow.common.output import read_csv
from rimflow.slowode.models import ManifoldPoint, OdeConfig, OdeRecord, OdeStopReason, OdeTrajectory
from rimflow.slowode.portrait import (
    circle_centre,
    cross_section_profile,
    exchanges_amplitude,
    preset_config,
    preset_points,
    run_preset,
    shifted_circle_distance,
    spirals_inward,
)

TINY = OdeConfig(K=8, L=8, tau_end=0.1, dtau=0.05, tol=None)


def _trajectory(a1, b):
    records = [OdeRecord(tau=0.1 * i, a1=complex(a), b=float(bb)) for i, (a, bb) in enumerate(zip(a1, b))]
    return OdeTrajectory(x0=ManifoldPoint(a1=records[0].a1, b=records[0].b), gamma=1.0, records=records)


class TestPresets:
    """Initial conditions of the figure presets."""

    def test_fig5_circle(self):
        """Eight points with 2|a1| = 0.6 m and b = 0."""
        points = preset_points("fig5")
        assert len(points) == 8
        assert all(abs(x.a1) == pytest.approx(0.3) and x.b == 0.0 for x in points)

    def test_fig6_single(self):
        """One trajectory."""
        assert preset_points("fig6", m=2.0) == [ManifoldPoint(a1=0.6, m=2.0)]

    def test_fig7_grid_filtered(self):
        """Grid points too close to the positivity boundary are dropped."""
        points = preset_points("fig7")
        assert len(points) == 10
        assert all(x.is_valid(0.05) for x in points)

    def test_unknown(self):
        """Only fig5, fig6 and fig7 exist."""
        with pytest.raises(ValueError, match="unknown preset"):
            preset_points("fig8")
        with pytest.raises(ValueError, match="unknown preset"):
            preset_config("fig8")


class TestCrossSections:
    """Free-surface geometry of manifold states."""

    def test_centre_signs(self):
        """x = -2 Re a1 and y = 2 Im a1."""
        assert circle_centre(ManifoldPoint(a1=0.1 + 0.2j)) == pytest.approx((-0.2, 0.4))

    def test_constant_profile(self):
        """A uniform film is a concentric circle."""
        theta, r = cross_section_profile(ManifoldPoint(), n=16)
        assert theta.shape == (16,)
        np.testing.assert_allclose(r, 0.9)

    def test_constant_is_a_circle(self):
        """No displacement, no distance."""
        assert shifted_circle_distance(ManifoldPoint()) <= 1e-12

    def test_distance_is_quadratic(self):
        """The shifted circle matches the film to second order in a1."""
        eps = 0.05
        far = shifted_circle_distance(ManifoldPoint(a1=eps * (1 + 1j)))
        near = shifted_circle_distance(ManifoldPoint(a1=0.5 * eps * (1 + 1j)))
        assert far / near == pytest.approx(4.0, rel=0.1)

    def test_degenerate_circle(self):
        """A film as thick as the cylinder has no circle around the axis."""
        with pytest.raises(ValueError, match="thickness"):
            shifted_circle_distance(ManifoldPoint(), thickness=1.0)


class TestTrajectoryShape:
    """Qualitative checks on slow-ODE trajectories."""

    def test_spirals_inward(self):
        """Monotone decay after dropping below the threshold."""
        assert spirals_inward(_trajectory([0.3, 0.25, 0.15, 0.1j, 0.05], [0.0] * 5))

    def test_rebound_is_not_inward(self):
        """A rise after the threshold fails the check."""
        assert not spirals_inward(_trajectory([0.3, 0.15, 0.16], [0.0] * 3))

    def test_never_below_threshold(self):
        """Trajectories that stay large do not count."""
        assert not spirals_inward(_trajectory([0.3, 0.28, 0.25], [0.0] * 3))

    def test_exchange(self):
        """Growth in either amplitude is an exchange."""
        assert exchanges_amplitude(_trajectory([0.2, 0.15, 0.1], [0.1, 0.2, 0.25]))
        assert exchanges_amplitude(_trajectory([0.1, 0.15, 0.1], [0.3, 0.2, 0.1]))
        assert not exchanges_amplitude(_trajectory([0.2, 0.15, 0.1], [-0.3, -0.2, -0.1]))


class TestRunPreset:
    """Preset runs write their outputs."""

    def test_fig6_outputs(self, tmp_path):
        """Trajectory CSV, index, centre plot and cross-sections."""
        index, trajs = run_preset("fig6", tmp_path, cfg=TINY)
        assert [t.reason for t in trajs] == [OdeStopReason.COMPLETED]
        for name in ("traj_000.csv", "portrait.json", "portrait_xy.svg", "cross_sections.csv", "cross_sections.svg"):
            assert (tmp_path / name).exists(), name
        assert index.snapshot_taus == pytest.approx([0.0, 0.05, 0.1])
        header, rows = read_csv(tmp_path / "cross_sections.csv")
        assert header == ["theta", "r_0", "r_1", "r_2"]
        assert rows.shape == (256, 4)

    def test_fig7_outputs(self, tmp_path):
        """fig7 plots |a1| against b."""
        run_preset("fig7", tmp_path, cfg=TINY, points=[ManifoldPoint(a1=0.05, b=0.3)])
        assert (tmp_path / "portrait_abs_a1_b.svg").exists()
        assert not (tmp_path / "portrait_xy.svg").exists()

    def test_failures_in_index(self, tmp_path):
        """A failing start is listed with its reason and an empty trajectory."""
        points = [ManifoldPoint(a1=0.1), ManifoldPoint(a1=0.45, b=0.2)]
        index, _ = run_preset("fig5", tmp_path, cfg=TINY, points=points)
        payload = json.loads((tmp_path / "portrait.json").read_text())
        assert [e["reason"] for e in payload["entries"]] == ["completed", "failed"]
        assert index.entries[1].tau_last == 0.0
        _, rows = read_csv(tmp_path / "traj_001.csv")
        assert rows.size == 0

    @pytest.mark.slow
    def test_fig5_spirals(self, tmp_path):
        """Every fig5 trajectory spirals in towards the uniform film."""
        _, trajs = run_preset("fig5", tmp_path)
        assert all(t.reason == OdeStopReason.COMPLETED for t in trajs)
        assert all(spirals_inward(t) for t in trajs)
        assert max(abs(t.records[-1].a1) for t in trajs) < 0.3 * math.exp(-0.5)
