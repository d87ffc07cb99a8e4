from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from rimflow.common.output import ensure_dir, line_plot_svg, write_csv, write_json
from rimflow.slowode.models import (
    ManifoldPoint,
    OdeConfig,
    OdeTrajectory,
    PortraitEntry,
    PortraitIndex,
)
from rimflow.slowode.service import phase_portrait, write_ode_trajectory

logger = logging.getLogger("slowode")

PRESETS = ("fig5", "fig6", "fig7")

# film height relative to the cylinder radius when drawing cross-sections
DEFAULT_THICKNESS = 0.1

PRESET_CONFIG: Dict[str, OdeConfig] = {
    "fig5": OdeConfig(K=8, L=8, tau_end=10.0, dtau=0.05, tol=1e-7),
    "fig6": OdeConfig(K=8, L=8, tau_end=8.0, dtau=0.05, tol=1e-7),
    "fig7": OdeConfig(K=8, L=8, tau_end=6.0, dtau=0.05, tol=1e-7),
}


def preset_points(name: str, m: float = 1.0) -> List[ManifoldPoint]:
    """
    Initial conditions of the figure presets:
      - fig5: eight points on the circle 2|a1| = 0.6m with b = 0
      - fig6: one b = 0 point at 2|a1| = 0.6m
      - fig7: |a1| x b grid, keeping points with margin >= 0.05m
    """
    if name == "fig5":
        return [ManifoldPoint(a1=0.3 * m * complex(math.cos(phi), math.sin(phi)), b=0.0, m=m)
                for phi in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)]
    if name == "fig6":
        return [ManifoldPoint(a1=0.3 * m, b=0.0, m=m)]
    if name == "fig7":
        points = []
        for a in (0.05, 0.15, 0.25):
            for b in (-0.6, -0.3, 0.3, 0.6):
                x = ManifoldPoint(a1=a * m, b=b * m, m=m)
                if x.is_valid(0.05):
                    points.append(x)
        return points
    raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def preset_config(name: str) -> OdeConfig:
    if name not in PRESET_CONFIG:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    return PRESET_CONFIG[name]


# ---------------------------------------------------------------------------
# cross-section geometry
# ---------------------------------------------------------------------------


def circle_centre(x: ManifoldPoint) -> Tuple[float, float]:
    """Centre of the cross-section circle, (x, y) with H0 = m - x cos theta - y sin theta."""
    return -2.0 * x.a1.real, 2.0 * x.a1.imag


def _height(x: ManifoldPoint, theta: np.ndarray, zeta: float) -> np.ndarray:
    return x.m + 2.0 * (x.a1 * np.exp(1j * theta)).real + x.b * math.cos(zeta)


def cross_section_profile(
    x: ManifoldPoint, zeta: float = 0.0, n: int = 256, thickness: float = DEFAULT_THICKNESS
) -> Tuple[np.ndarray, np.ndarray]:
    """(theta, r) with r = 1 - thickness * H0(theta, zeta) the free-surface radius."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return theta, 1.0 - thickness * _height(x, theta, zeta)


def shifted_circle_distance(
    x: ManifoldPoint, zeta: float = 0.0, n: int = 256, thickness: float = DEFAULT_THICKNESS
) -> float:
    """
    H^4(T) distance between the scaled cross-section height and the height
    of the exact circle of radius 1 - thickness*c_zeta around the shifted centre.
    """
    theta = 2.0 * math.pi * np.arange(n) / n
    c_zeta = x.m + x.b * math.cos(zeta)
    radius = 1.0 - thickness * c_zeta
    cx, cy = (thickness * v for v in circle_centre(x))
    if radius <= math.hypot(cx, cy):
        raise ValueError("shifted circle does not contain the cylinder axis; reduce thickness or amplitude")
    s = cx * np.cos(theta) + cy * np.sin(theta)
    r = s + np.sqrt(s**2 + radius**2 - cx**2 - cy**2)
    diff = (1.0 - r) - thickness * _height(x, theta, zeta)
    coeffs = sfft.fft(diff) / n
    k = sfft.fftfreq(n, d=1.0 / n)
    return float(math.sqrt(np.sum((1.0 + k**2) ** 4 * np.abs(coeffs) ** 2)))


# ---------------------------------------------------------------------------
# trajectory shape checks
# ---------------------------------------------------------------------------


def spirals_inward(traj: OdeTrajectory, below: float = 0.2, slack: float = 1e-12) -> bool:
    """|a1| strictly decreases once it has dropped below the threshold."""
    mod = np.abs(traj.a1())
    idx = np.flatnonzero(mod < below)
    if idx.size == 0:
        return False
    tail = mod[idx[0]:]
    return tail.size < 2 or bool(np.all(np.diff(tail) < slack))


def exchanges_amplitude(traj: OdeTrajectory, rise: float = 1e-6) -> bool:
    """True when |a1| or |b| increases somewhere along the trajectory."""
    return bool(np.max(np.diff(np.abs(traj.a1())), initial=0.0) > rise
                or np.max(np.diff(np.abs(traj.b())), initial=0.0) > rise)


# ---------------------------------------------------------------------------
# preset runs
# ---------------------------------------------------------------------------


def _index_entry(i: int, traj: OdeTrajectory, csv: str) -> PortraitEntry:
    return PortraitEntry(
        index=i,
        re_a1=traj.x0.a1.real,
        im_a1=traj.x0.a1.imag,
        b=traj.x0.b,
        reason=traj.reason,
        message=traj.message,
        accepted=traj.accepted,
        rejected=traj.rejected,
        tau_last=traj.records[-1].tau if traj.records else 0.0,
        csv=csv,
    )


def _snapshot_records(traj: OdeTrajectory, count: int = 3) -> List[int]:
    n = len(traj.records)
    return sorted({int(round(j * (n - 1) / (count - 1))) for j in range(count)})


def write_cross_sections(out_dir: Path, traj: OdeTrajectory, thickness: float = DEFAULT_THICKNESS) -> List[float]:
    picks = _snapshot_records(traj)
    columns, series, labels, taus = [], [], [], []
    theta = None
    for j in picks:
        rec = traj.records[j]
        x = ManifoldPoint(a1=rec.a1, b=rec.b, m=traj.x0.m)
        theta, r = cross_section_profile(x, thickness=thickness)
        columns.append(r)
        closed = np.append(theta, theta[0])
        rr = np.append(r, r[0])
        series.append((rr * np.cos(closed), rr * np.sin(closed)))
        labels.append(f"tau={rec.tau:.3g}")
        taus.append(rec.tau)
    wall = np.linspace(0.0, 2.0 * math.pi, 257)
    series.append((np.cos(wall), np.sin(wall)))
    labels.append("cylinder wall")
    header = ["theta"] + [f"r_{i}" for i in range(len(columns))]
    write_csv(out_dir / "cross_sections.csv", header, zip(theta, *columns))
    line_plot_svg(out_dir / "cross_sections.svg", series, "x", "y", title="cross-sections", labels=labels,
                  equal_aspect=True)
    return taus


def run_preset(
    name: str,
    out_dir: Path,
    gamma: float = 1.0,
    m: float = 1.0,
    cfg: Optional[OdeConfig] = None,
    workers: Optional[int] = None,
    points: Optional[Sequence[ManifoldPoint]] = None,
) -> Tuple[PortraitIndex, List[OdeTrajectory]]:
    """Integrate a preset, write one CSV per trajectory, portrait.json and the overlay plots."""
    cfg = cfg or preset_config(name)
    x0s = list(points) if points is not None else preset_points(name, m)
    ensure_dir(out_dir)
    logger.info("phase portrait %s: %d trajectories, tau_end=%g", name, len(x0s), cfg.tau_end)
    trajs = phase_portrait(x0s, gamma, cfg, workers)

    index = PortraitIndex(preset=name, gamma=gamma, m=m)
    for i, traj in enumerate(trajs):
        csv = f"traj_{i:03d}.csv"
        write_ode_trajectory(out_dir / csv, traj)
        index.entries.append(_index_entry(i, traj, csv))

    drawn = [t for t in trajs if len(t.records) > 1]
    if name in ("fig5", "fig6") and drawn:
        xy = [(-2.0 * t.a1().real, 2.0 * t.a1().imag) for t in drawn]
        line_plot_svg(out_dir / "portrait_xy.svg", xy, "x", "y", title=f"{name}: centre paths",
                      equal_aspect=True, markers={"axis": (0.0, 0.0)})
    if name == "fig7" and drawn:
        line_plot_svg(out_dir / "portrait_abs_a1_b.svg", [(np.abs(t.a1()), t.b()) for t in drawn],
                      "|a1|", "b", title=f"{name}: |a1| against b")
    if name == "fig6" and drawn:
        index.snapshot_taus = write_cross_sections(out_dir, drawn[0])

    write_json(out_dir / "portrait.json", index)
    return index, trajs
