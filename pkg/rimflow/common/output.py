from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    ensure_dir(path.parent)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> Tuple[List[str], np.ndarray]:
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_json(path: Path, payload: Any) -> Path:
    ensure_dir(path.parent)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def line_plot_svg(
    path: Path,
    series: Sequence[Tuple[np.ndarray, np.ndarray]],
    xlabel: str,
    ylabel: str,
    title: Optional[str] = None,
    labels: Optional[Sequence[str]] = None,
    equal_aspect: bool = False,
    markers: Optional[Dict[str, Tuple[float, float]]] = None,
) -> Path:
    """Line chart written through matplotlib's SVG backend; CSV stays the authoritative output."""
    ensure_dir(path.parent)
    fig, ax = plt.subplots(figsize=(6.0, 6.0 if equal_aspect else 4.0))
    for i, (x, y) in enumerate(series):
        label = labels[i] if labels is not None and i < len(labels) else None
        ax.plot(np.asarray(x), np.asarray(y), linewidth=1.0, label=label)
    for name, (mx, my) in (markers or {}).items():
        ax.plot([mx], [my], "k+", markersize=8)
        ax.annotate(name, (mx, my), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if equal_aspect:
        ax.set_aspect("equal", adjustable="datalim")
    if labels:
        ax.legend(fontsize=7, loc="best")
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
