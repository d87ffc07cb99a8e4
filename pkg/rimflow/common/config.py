from __future__ import annotations

import argparse
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from rimflow.spectral.models import Params


class RunConfig(BaseModel):
    """Parameters shared by every subcommand."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=1.0, gt=0.0)
    delta: float = Field(default=0.0, ge=0.0)
    ell: float = Field(default=math.pi, gt=0.0)
    m: float = Field(default=1.0, gt=0.0)
    K: Optional[int] = Field(default=None, ge=2)
    L: Optional[int] = Field(default=None, ge=2)
    out: Path = Path("out")
    seed: int = 0
    json_path: Optional[Path] = None

    @property
    def params(self) -> Params:
        return Params(gamma=self.gamma, delta=self.delta, ell=self.ell, mass=self.m)

    def lattice_size(self, K: int, L: int) -> tuple:
        """Command defaults for K and L unless given explicitly."""
        return (self.K if self.K is not None else K, self.L if self.L is not None else L)

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        return cls(
            gamma=ns.gamma,
            delta=ns.delta,
            ell=ns.ell,
            m=ns.m,
            K=ns.K,
            L=ns.L,
            out=Path(ns.out),
            seed=ns.seed,
            json_path=Path(ns.json) if ns.json else None,
        )


def add_common_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.0, help="rescaled surface tension")
    p.add_argument("--delta", type=float, default=0.0, help="gravity parameter")
    p.add_argument("--ell", type=float, default=math.pi, help="cylinder aspect ratio")
    p.add_argument("--m", type=float, default=1.0, help="mean film height (mass)")
    p.add_argument("-K", type=int, default=None, help="theta truncation order")
    p.add_argument("-L", type=int, default=None, help="zeta truncation order")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--json", default=None, metavar="PATH", help="write a JSON summary to PATH")
    p.add_argument("--config", default=None, metavar="FILE", help="key=value file of flag defaults")
    p.add_argument("--verbose", action="store_true", help="log at DEBUG level")


def float_list(raw: str) -> List[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def read_config_file(path: Path) -> Dict[str, str]:
    """
    key=value lines; '#' starts a comment. Keys are long flag names with
    '-' or '_' ('t_end' and 't-end' are the same key).
    """
    values: Dict[str, str] = {}
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{path}:{n}: expected key=value, got {raw!r}")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _config_flags(values: Dict[str, str]) -> List[str]:
    flags: List[str] = []
    for key, value in values.items():
        flag = f"-{key}" if key in ("K", "L") else f"--{key}"
        if value.lower() in ("true", "yes", "on"):
            flags.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            flags.extend([flag, value])
    return flags


def expand_config(argv: Sequence[str]) -> List[str]:
    """
    Splice the flags of a --config file in right after the subcommand so
    that flags given on the command line, which come later, win.
    """
    argv = list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config or not argv:
        return argv
    values = read_config_file(Path(known.config))
    return argv[:1] + _config_flags(values) + argv[1:]
