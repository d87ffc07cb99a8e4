from __future__ import annotations

import argparse
import logging
import sys

from rimflow.common.config import RunConfig, add_common_arguments
from rimflow.common.errors import PositivityError
from rimflow.common.output import write_json
from rimflow.evolve.models import EvolveConfig, Frame, StopReason
from rimflow.evolve.service import initial_field, integrate, write_trajectory
from rimflow.spectral.snapshot import write_field

logger = logging.getLogger("cli")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("simulate", help="integrate the full thin-film equation")
    add_common_arguments(p)
    p.add_argument("--init", default="preset:constant", help="preset:... or file:PATH")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--frame", choices=[f.value for f in Frame], default=Frame.COMOVING.value)
    p.add_argument("--tol", type=float, default=1e-7, help="relative step-doubling tolerance")
    p.add_argument("--rupture-eps", type=float, default=1e-3)
    p.add_argument("--snapshot-every", type=int, default=0, help="write a field snapshot every N steps")
    p.add_argument("--sample-every", type=int, default=1, help="record diagnostics every N steps")
    p.set_defaults(handler=cmd_simulate)


def cmd_simulate(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    K, L = run.lattice_size(16, 16)
    cfg = EvolveConfig(
        dt=ns.dt,
        t_end=ns.t_end,
        frame=Frame(ns.frame),
        tol=ns.tol,
        rupture_eps=ns.rupture_eps,
        snapshot_every=ns.snapshot_every,
        sample_every=ns.sample_every,
    )
    h0 = initial_field(ns.init, K, L, run.ell, run.m)
    try:
        traj = integrate(h0, run.params, cfg)
    except PositivityError as e:
        raise ValueError(str(e)) from e
    path = write_trajectory(run.out, traj)
    if traj.final is not None:
        write_field(run.out / "final.rff", traj.final)
    summary = {
        "command": "simulate",
        "reason": traj.reason.value,
        "message": traj.message,
        "accepted": traj.accepted,
        "rejected": traj.rejected,
        "energy_increases": traj.energy_increases,
        "t_last": traj.records[-1].t,
        "trajectory": str(path),
        "snapshots": len(traj.snapshots),
    }
    if run.json_path:
        write_json(run.json_path, summary)

    if traj.reason != StopReason.COMPLETED:
        print(f"{traj.reason.value}: {traj.message}", file=sys.stderr)
        return 3
    print(f"{traj.reason.value}: {traj.message} ({traj.accepted} steps, {traj.rejected} rejections) -> {path}")
    return 0
