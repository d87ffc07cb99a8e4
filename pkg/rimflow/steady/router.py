from __future__ import annotations

import argparse
import logging
from typing import Dict, Optional, Tuple

from rimflow.common.config import RunConfig, add_common_arguments, float_list
from rimflow.common.output import write_csv, write_json
from rimflow.common.workers import run_parallel
from rimflow.spectral.snapshot import write_field
from rimflow.steady.models import REDUCED_F_HEADER, STEADY_HEADER
from rimflow.steady.service import continuation, lyapunov_schmidt_c, reduced_f_sample

logger = logging.getLogger("cli")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("steady", help="steady states by Newton continuation in delta")
    add_common_arguments(p)
    p.add_argument("--deltas", type=float_list, default=None, help="comma-separated increasing delta values")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=25)
    p.set_defaults(handler=cmd_steady)

    r = subparsers.add_parser("reduced-f", help="sample the reduced bifurcation function f(a, delta)")
    add_common_arguments(r)
    r.add_argument("--a", type=float_list, default=[-1e-2, 1e-2], help="comma-separated amplitudes")
    r.add_argument("--deltas", type=float_list, default=[1e-2], help="comma-separated delta values")
    r.add_argument("--tol", type=float, default=1e-12)
    r.set_defaults(handler=cmd_reduced_f)


def cmd_steady(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    K, L = run.lattice_size(16, 2)
    deltas = ns.deltas if ns.deltas else [run.delta]
    results = continuation(deltas, run.m, run.gamma, run.ell, K=K, L=L, tol=ns.tol, max_iters=ns.max_iters)
    path = write_csv(run.out / "steady.csv", STEADY_HEADER, (r.row() for r in results))
    for i, res in enumerate(results):
        write_field(run.out / f"steady_{i}.rff", res.field)
    if run.json_path:
        write_json(run.json_path, {"command": "steady", "results": [dict(zip(STEADY_HEADER, r.row())) for r in results]})
    print(f"{len(results)} steady states -> {path}")
    return 0


def _fd_estimate(samples: Dict[Tuple[float, float], float]) -> Optional[float]:
    for (a, d), f in sorted(samples.items()):
        if a > 0 and d != 0 and (-a, d) in samples:
            return (f - samples[(-a, d)]) / (a * d**2)
    return None


def cmd_reduced_f(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    K, L = run.lattice_size(16, 16)
    grid = [(a, d) for d in ns.deltas for a in ns.a]

    def sample(point: Tuple[float, float]):
        a, d = point
        return reduced_f_sample(a, d, run.m, run.gamma, run.ell, K=K, L=L, tol=ns.tol)

    samples = run_parallel(sample, grid)
    path = write_csv(run.out / "reduced_f.csv", REDUCED_F_HEADER, (s.row() for s in samples))
    estimate = _fd_estimate({(s.a, s.delta): s.f for s in samples})
    closed = lyapunov_schmidt_c(run.m, run.gamma, run.ell)
    summary = {
        "command": "reduced-f",
        "samples": [s.model_dump() for s in samples],
        "d_a_d_delta2_f_fd": estimate,
        "d_a_d_delta2_f_closed_form": closed,
    }
    if run.json_path:
        write_json(run.json_path, summary)
    if estimate is not None:
        print(f"d_a d_delta^2 f(0,0): finite difference {estimate:.6g}, closed form {closed:.6g}")
    print(f"{len(samples)} samples -> {path}")
    return 0
