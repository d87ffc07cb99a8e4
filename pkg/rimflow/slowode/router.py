from __future__ import annotations

import argparse
import logging
import math

from rimflow.common.config import RunConfig, add_common_arguments
from rimflow.common.output import write_json
from rimflow.slowode.models import ManifoldPoint, OdeConfig, OdeStopReason
from rimflow.slowode.portrait import PRESETS, preset_config, run_preset
from rimflow.slowode.service import integrate_ode, write_ode_trajectory

logger = logging.getLogger("cli")


def _require_critical_length(run: RunConfig) -> None:
    if not math.isclose(run.ell, math.pi, rel_tol=1e-9):
        raise ValueError(f"the slow-manifold ODE is defined for ell = pi only, got ell={run.ell}")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("slow-ode", help="integrate the reduced ODE on the slow manifold")
    add_common_arguments(p)
    p.add_argument("--a1", type=complex, default=0.1 + 0j, help="complex amplitude, e.g. 0.1+0.05j")
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--tau-end", type=float, default=2.0)
    p.add_argument("--dtau", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-8, help="step-halving tolerance; 0 for fixed steps")
    p.add_argument("--margin", type=float, default=0.0, help="positivity margin as a fraction of m")
    p.set_defaults(handler=cmd_slow_ode)

    q = subparsers.add_parser("phase-portrait", help="run a figure preset of slow-ODE trajectories")
    add_common_arguments(q)
    q.add_argument("--preset", choices=PRESETS, default="fig5")
    q.add_argument("--tau-end", type=float, default=None, help="override the preset's final slow time")
    q.set_defaults(handler=cmd_phase_portrait)


def cmd_slow_ode(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    _require_critical_length(run)
    K, L = run.lattice_size(16, 16)
    cfg = OdeConfig(K=K, L=L, tau_end=ns.tau_end, dtau=ns.dtau, tol=ns.tol or None, margin=ns.margin)
    x0 = ManifoldPoint(a1=ns.a1, b=ns.b, m=run.m)
    traj = integrate_ode(x0, run.gamma, cfg)
    path = write_ode_trajectory(run.out / "slow_ode.csv", traj)
    if run.json_path:
        write_json(run.json_path, {
            "command": "slow-ode",
            "reason": traj.reason.value,
            "message": traj.message,
            "accepted": traj.accepted,
            "rejected": traj.rejected,
            "trajectory": str(path),
        })
    print(f"{traj.reason.value}: {traj.message} -> {path}")
    return 3 if traj.reason == OdeStopReason.FAILED else 0


def cmd_phase_portrait(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    _require_critical_length(run)
    cfg = preset_config(ns.preset)
    updates = {}
    if ns.tau_end is not None:
        updates["tau_end"] = ns.tau_end
    if run.K is not None:
        updates["K"] = run.K
    if run.L is not None:
        updates["L"] = run.L
    if updates:
        cfg = OdeConfig(**{**cfg.model_dump(), **updates})
    index, _ = run_preset(ns.preset, run.out, gamma=run.gamma, m=run.m, cfg=cfg)
    if run.json_path:
        write_json(run.json_path, index)
    failed = sum(1 for e in index.entries if e.reason == OdeStopReason.FAILED)
    print(f"{ns.preset}: {len(index.entries)} trajectories ({failed} failed) -> {run.out / 'portrait.json'}")
    return 3 if failed else 0
