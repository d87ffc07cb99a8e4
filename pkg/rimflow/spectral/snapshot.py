from __future__ import annotations

from pathlib import Path
from typing import Dict

import numpy as np

from rimflow.spectral.models import REALITY_TOL, SpectralField, conjugacy_defect, get_lattice

MAGIC = "rimflow-field"
VERSION = "v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(path: Path, f: SpectralField) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{MAGIC} {VERSION} K={f.K} L={f.L} ell={_fmt(f.ell)}"]
    for k in range(-f.K, f.K + 1):
        for l in range(0, f.L + 1):
            c = f.coeffs[k + f.K, l]
            lines.append(f"{k} {l} {_fmt(c.real)} {_fmt(c.imag)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_header(line: str) -> Dict[str, str]:
    parts = line.split()
    if len(parts) < 2 or parts[0] != MAGIC:
        raise ValueError(f"not a {MAGIC} file: {line!r}")
    if parts[1] != VERSION:
        raise ValueError(f"unsupported {MAGIC} version {parts[1]!r}")
    fields: Dict[str, str] = {}
    for token in parts[2:]:
        key, _, value = token.partition("=")
        fields[key] = value
    for key in ("K", "L", "ell"):
        if key not in fields:
            raise ValueError(f"header missing {key}=")
    return fields


def read_field(path: Path) -> SpectralField:
    """
    Parse a rimflow-field v1 file. Modes not listed are zero; the field is
    tagged real when its coefficients satisfy conjugate symmetry.
    """
    text = path.read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty field file")
    header = _parse_header(text[0])
    lat = get_lattice(int(header["K"]), int(header["L"]), float(header["ell"]))
    c = np.zeros(lat.shape, dtype=complex)
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'k l re im', got {line!r}")
        k, l = int(parts[0]), int(parts[1])
        c[lat.index(k, l)] = complex(float(parts[2]), float(parts[3]))
    real = conjugacy_defect(c) <= REALITY_TOL
    return SpectralField.wrap(c, lat, real=real)
