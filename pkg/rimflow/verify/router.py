from __future__ import annotations

import argparse
import logging
from typing import List, Optional

from rimflow.common.config import RunConfig, add_common_arguments
from rimflow.common.output import write_json
from rimflow.verify.models import VerifyReport
from rimflow.verify.service import list_checks, run_checks

logger = logging.getLogger("cli")


def _names(raw: Optional[List[str]]) -> List[str]:
    names: List[str] = []
    for item in raw or []:
        names.extend(n.strip() for n in item.split(",") if n.strip())
    return names


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("verify", help="run the built-in acceptance checks")
    add_common_arguments(p)
    p.add_argument("--only", action="append", default=None, help="check name(s), comma-separated or repeated")
    p.add_argument("--list", action="store_true", help="list the checks and exit")
    p.add_argument("--quick", action="store_true", help="skip the slow experiments")
    p.set_defaults(handler=cmd_verify)


def render(report: VerifyReport) -> str:
    width = max((len(c.name) for c in report.checks), default=10)
    lines = []
    for c in report.checks:
        measured = "" if c.measured is None else f"{c.measured:.6g}"
        lines.append(f"{c.status.value.upper():5}  {c.name:{width}}  {measured:>12}  {c.seconds:7.1f}s  {c.detail}")
    passed = sum(1 for c in report.checks if c.status.value == "pass")
    lines.append(f"{passed}/{len(report.checks)} checks passed")
    return "\n".join(lines)


def cmd_verify(ns: argparse.Namespace) -> int:
    if ns.list:
        for c in list_checks(ns.quick):
            print(f"{c.name:28} {'slow ' if c.slow else '     '} {c.summary}")
        return 0
    run = RunConfig.from_args(ns)
    report = run_checks(only=_names(ns.only), quick=ns.quick, seed=run.seed, out=run.out)
    print(render(report))
    if run.json_path:
        write_json(run.json_path, report)
    return 0 if report.ok else 1
