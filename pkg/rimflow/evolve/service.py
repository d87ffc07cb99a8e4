from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from rimflow.common.errors import BlowUp, PositivityError, Rupture, StepRejected
from rimflow.common.output import write_csv
from rimflow.common.retry import RetryConfig, regrow, retry_step
from rimflow.evolve.models import (
    TRAJECTORY_HEADER,
    EvolveConfig,
    Frame,
    Snapshot,
    StopReason,
    Trajectory,
    TrajectoryRecord,
)
from rimflow.spectral import service as spectral
from rimflow.spectral.models import Lattice, Params, SpectralField, get_lattice
from rimflow.spectral.snapshot import read_field, write_field

logger = logging.getLogger("evolve")

RhsFn = Callable[[SpectralField, float], SpectralField]

# a final step within this relative distance of t_end lands on t_end exactly
END_SLACK = 1e-9


def _check_params(h: SpectralField, p: Params) -> Lattice:
    if not h.real:
        raise ValueError("film height must be a real field")
    lat = h.lattice
    if not math.isclose(lat.ell, p.ell, rel_tol=1e-12):
        raise ValueError(f"field ell={lat.ell} does not match params ell={p.ell}")
    return lat


def rhs_coeffs(
    c: np.ndarray,
    lat: Lattice,
    gamma: float,
    delta: float,
    phase: float = 0.0,
    transport: bool = True,
    rupture_eps: float = 1e-3,
    t: Optional[float] = None,
) -> np.ndarray:
    """
    -[h_theta] - gamma A(P_K h^3) h + delta (h^3 cos(theta + phase))_theta

    The transport term is present in the lab frame only. h^3 and the
    gravity product are formed on the dealiasing grid.
    """
    values = spectral.to_grid(c, lat).real
    min_h = float(values.min())
    if min_h < rupture_eps:
        raise Rupture(min_h, t)
    cubed = values**3
    mobility = spectral.from_grid(cubed.astype(complex), lat)
    out = -gamma * spectral.mobility_kernel(mobility, c, lat)
    if delta:
        gravity = spectral.from_grid(cubed * np.cos(lat.theta + phase), lat)
        out = out + delta * 1j * lat.k * gravity
    if transport:
        out = out - 1j * lat.k * c
    return spectral.symmetrize_real(out, what="rhs", scale=float(np.max(np.abs(c))))


def rhs_lab(h: SpectralField, p: Params, rupture_eps: float = 1e-3) -> SpectralField:
    lat = _check_params(h, p)
    return h.like(rhs_coeffs(h.coeffs, lat, p.gamma, p.delta, 0.0, True, rupture_eps))


def rhs_comoving(H: SpectralField, t: float, p: Params, rupture_eps: float = 1e-3) -> SpectralField:
    lat = _check_params(H, p)
    return H.like(rhs_coeffs(H.coeffs, lat, p.gamma, p.delta, t, False, rupture_eps, t))


def frame_rhs(frame: Frame, p: Params, rupture_eps: float = 1e-3) -> RhsFn:
    if frame == Frame.LAB:
        return lambda h, t: rhs_lab(h, p, rupture_eps)
    return lambda h, t: rhs_comoving(h, t, p, rupture_eps)


def _implicit_symbol(h: SpectralField, p: Params, cfg: EvolveConfig, custom_rhs: bool) -> np.ndarray:
    lat = h.lattice
    a = p.gamma * h.mean**3 * lat.q2**2 + 0j
    if cfg.frame == Frame.LAB and not custom_rhs:
        a = a + 1j * lat.k
    return a


def step(
    h: SpectralField,
    t: float,
    dt: float,
    p: Params,
    cfg: EvolveConfig,
    rhs: Optional[RhsFn] = None,
) -> SpectralField:
    """
    One IMEX step with step-doubling acceptance.

    The constant-coefficient part gamma*mbar^3*lap^2 (plus the transport
    term in the lab frame) is implicit and diagonal; everything else is
    explicit. The doubled half-step result is returned when the relative
    difference to the full step stays below cfg.tol.
    """
    _check_params(h, p)
    rhs_fn = rhs or frame_rhs(cfg.frame, p, cfg.rupture_eps)
    a = _implicit_symbol(h, p, cfg, custom_rhs=rhs is not None)

    def euler(c: np.ndarray, tt: float, d: float) -> np.ndarray:
        f = rhs_fn(h.like(c), tt).coeffs
        return (c + d * (f + a * c)) / (1.0 + d * a)

    full = euler(h.coeffs, t, dt)
    half = euler(euler(h.coeffs, t, 0.5 * dt), t + 0.5 * dt, 0.5 * dt)
    scale = max(float(np.linalg.norm(half)), 1e-300)
    err = float(np.linalg.norm(full - half)) / scale
    if err > cfg.tol:
        raise StepRejected(err, cfg.tol, dt)

    new = h.like(spectral.symmetrize_real(half, what="step"))
    norm4 = spectral.sobolev_norm(new, 4.0)
    if not math.isfinite(norm4) or norm4 > cfg.blowup_H4:
        raise BlowUp(norm4, t + dt)
    min_h = spectral.min_on_grid(new)
    if min_h < cfg.rupture_eps:
        raise Rupture(min_h, t + dt)
    return new


def diagnostics(h: SpectralField, t: float) -> TrajectoryRecord:
    a1, b = spectral.p1_coordinates(h)
    return TrajectoryRecord(
        t=t,
        mass=h.mean,
        energy=spectral.energy(h),
        min_h=spectral.min_on_grid(h),
        dist_M=spectral.manifold_distance(h),
        a1=a1,
        b=b,
    )


def integrate(
    h0: SpectralField,
    p: Params,
    cfg: EvolveConfig,
    retry: Optional[RetryConfig] = None,
    rhs: Optional[RhsFn] = None,
) -> Trajectory:
    """
    Adaptive IMEX run from h0 up to cfg.t_end.

    Steps are accepted on the step-doubling estimate alone. Without gravity
    the energy is a Lyapunov function; an accepted step that raises it by
    more than cfg.energy_slack is logged and counted, not retried.
    """
    retry = retry or RetryConfig()
    _check_params(h0, p)
    traj = Trajectory()
    h, t, dt = h0, 0.0, cfg.dt
    min0 = spectral.min_on_grid(h0)
    if min0 < cfg.rupture_eps:
        raise PositivityError(f"initial film is not positive: min h = {min0:.6g}", min_h=min0)
    traj.records.append(diagnostics(h, t))
    check_energy = p.delta == 0.0 and rhs is None
    energy = spectral.energy(h)

    steps = 0
    while t < cfg.t_end and steps < cfg.max_steps:
        remaining = cfg.t_end - t
        last = remaining <= dt * (1.0 + END_SLACK)
        target = remaining if last else dt
        try:
            h_new, used = retry_step(lambda d: step(h, t, d, p, cfg, rhs=rhs), target, retry)
        except Rupture as e:
            traj.reason, traj.message = StopReason.RUPTURE, str(e)
            break
        except BlowUp as e:
            traj.reason, traj.message = StopReason.BLOWUP, str(e)
            break
        except StepRejected as e:
            traj.reason, traj.message = StopReason.STEP_COLLAPSE, f"step size collapsed: {e}"
            break

        if used < target:
            traj.rejected += int(round(math.log2(target / used)))
            dt = regrow(used, cfg.dt, retry)
            last = False
        h, t = h_new, cfg.t_end if last else t + used
        steps += 1
        traj.accepted += 1
        if check_energy:
            e_new = spectral.energy(h)
            if e_new > energy + cfg.energy_slack:
                traj.energy_increases += 1
                logger.warning("energy rose by %.3e at t=%.6g", e_new - energy, t)
            energy = e_new
        if steps % cfg.sample_every == 0 or t >= cfg.t_end:
            traj.records.append(diagnostics(h, t))
        if cfg.snapshot_every and steps % cfg.snapshot_every == 0:
            traj.snapshots.append(Snapshot(index=len(traj.snapshots), t=t, field=h))

    if traj.reason == StopReason.COMPLETED:
        traj.message = f"reached t={t:.6g}"
    logger.info(
        "integrate stopped: %s (%s); accepted=%d rejected=%d",
        traj.reason.value,
        traj.message,
        traj.accepted,
        traj.rejected,
    )
    traj.final = h
    return traj


# ---------------------------------------------------------------------------
# initial data, post-processing, output
# ---------------------------------------------------------------------------


def cos_mode(k: int, l: int, amplitude: float, lat: Lattice) -> np.ndarray:
    """Coefficients of amplitude*cos(k theta)*cos(l zeta)."""
    c = np.zeros(lat.shape, dtype=complex)
    weight = amplitude * (0.5 if k else 1.0) * (0.5 if l else 1.0)
    c[lat.index(k, l)] += weight
    if k:
        c[lat.index(-k, l)] += weight
    return c


def initial_field(spec: str, K: int, L: int, ell: float, m: float) -> SpectralField:
    """
    Parse an initial-condition spec:
      - preset:constant
      - preset:manifold:a1=0.1,b=0.05       (a1 may be complex, e.g. 0.1+0.02j)
      - preset:cos:1,0=0.05;0,2=0.03        (amplitudes of cos(k theta)cos(l zeta))
      - preset:modes:1,0=0.05;0,2=0.03      (same as preset:cos)
      - file:PATH                           (rimflow-field v1)
    """
    if spec.startswith("file:"):
        return read_field(Path(spec[len("file:"):]))
    if not spec.startswith("preset:"):
        raise ValueError(f"unknown initial condition {spec!r}")
    lat = get_lattice(K, L, ell)
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.index(0, 0)] = m
    body = spec[len("preset:"):]
    kind, _, args = body.partition(":")
    if kind == "constant":
        pass
    elif kind == "manifold":
        values = dict(item.split("=", 1) for item in args.split(",") if item)
        a1 = complex(values.get("a1", "0"))
        b = float(values.get("b", "0"))
        c[lat.index(1, 0)] += a1
        c[lat.index(-1, 0)] += a1.conjugate()
        c[lat.index(0, 1)] += 0.5 * b
    elif kind in ("cos", "modes"):
        for item in filter(None, args.split(";")):
            mode, _, amp = item.partition("=")
            k, l = (int(x) for x in mode.split(","))
            c += cos_mode(k, l, float(amp), lat)
    else:
        raise ValueError(f"unknown preset {kind!r}")
    return SpectralField.wrap(c, lat)


def to_comoving(h: SpectralField, t: float) -> SpectralField:
    """Lab-frame field at time t expressed in the rotating coordinate theta - t."""
    return h.like(h.coeffs * np.exp(1j * h.lattice.k * t))


def travelling_wave_distance(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """
    (t, ||H(t) - H_final||_{H^4}) over the snapshots of a lab-frame run,
    both fields taken to the co-moving frame first.
    """
    if traj.final is None or not traj.snapshots:
        raise ValueError("travelling_wave_distance needs snapshots and a final field")
    t_final = traj.records[-1].t
    target = to_comoving(traj.final, t_final)
    times = np.array([s.t for s in traj.snapshots])
    dist = np.array([spectral.sobolev_norm(to_comoving(s.field, s.t) - target, 4.0) for s in traj.snapshots])
    return times, dist


def growth_rate(t: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log|values| against t."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    slope, _ = np.polyfit(t, y, 1)
    return float(slope)


def convergence_bound(traj: Trajectory, gamma: float) -> np.ndarray:
    """2*pi*sqrt(3) dist(0) exp(-gamma c0^3 t) with c0 the smallest observed film height."""
    t = traj.column("t")
    c0 = float(np.min(traj.column("min_h")))
    dist0 = traj.records[0].dist_M
    return 2.0 * math.pi * math.sqrt(3.0) * dist0 * np.exp(-gamma * c0**3 * t)


def late_plateau(traj: Trajectory, window: float) -> float:
    t = traj.column("t")
    d = traj.column("dist_M")
    return float(np.max(d[t >= t[-1] - window]))


def write_trajectory(out_dir: Path, traj: Trajectory, name: str = "trajectory.csv") -> Path:
    path = write_csv(out_dir / name, TRAJECTORY_HEADER, (r.row() for r in traj.records))
    for snap in traj.snapshots:
        write_field(out_dir / f"snap_{snap.index}_{format(snap.t, '.6g')}.rff", snap.field)
    return path
