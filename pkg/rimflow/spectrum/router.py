from __future__ import annotations

import argparse
import logging

from rimflow.common.config import RunConfig, add_common_arguments
from rimflow.common.output import write_json
from rimflow.spectrum.models import Stability
from rimflow.spectrum.service import (
    assemble_L0,
    eigensolve,
    spectrum_of_steady,
    write_spectrum,
    zero_mean_modes,
)
from rimflow.spectral.models import get_lattice
from rimflow.steady.service import expansion_Hdelta, newton_steady

logger = logging.getLogger("cli")


def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("spectrum", help="eigenvalues of the linearization about a steady state")
    add_common_arguments(p)
    p.add_argument("--frame", choices=["lab", "comoving"], default="lab")
    p.add_argument("--tol", type=float, default=1e-10, help="Newton tolerance for the steady state")
    p.set_defaults(handler=cmd_spectrum)


def cmd_spectrum(ns: argparse.Namespace) -> int:
    run = RunConfig.from_args(ns)
    K, L = run.lattice_size(8, 8)
    p = run.params
    if run.delta == 0.0:
        _, modes = zero_mean_modes(get_lattice(K, L, run.ell))
        report = eigensolve(assemble_L0(run.m, run.gamma, run.ell, K, L, frame=ns.frame), modes, p, ns.frame)
    else:
        guess = expansion_Hdelta(run.m, run.gamma, run.delta, K=K, L=L, ell=run.ell)
        steady = newton_steady(p, guess, tol=ns.tol)
        report = spectrum_of_steady(steady.field, p, frame=ns.frame)
    path = write_spectrum(run.out / "spectrum.csv", report)
    if run.json_path:
        write_json(run.json_path, report)
    top = report.eigenvalues[0]
    print(
        f"top eigenvalue {top.value.real:.10g}{top.value.imag:+.10g}i at mode {top.mode}; "
        f"{report.count(Stability.UNSTABLE)} unstable, {report.count(Stability.CRITICAL)} critical -> {path}"
    )
    return 0
