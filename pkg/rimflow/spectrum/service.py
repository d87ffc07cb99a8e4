from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from rimflow.common.errors import EigenSolveError
from rimflow.common.output import write_csv
from rimflow.common.settings import matrix_size_cap
from rimflow.spectral import service as spectral
from rimflow.spectral.models import Lattice, Params, SpectralField, get_lattice
from rimflow.spectrum.models import SPECTRUM_HEADER, EigenEntry, SpectrumReport, Stability, classify
from rimflow.steady.service import linearization_kernel

logger = logging.getLogger("spectrum")


def lambda_closed_form(k: int, l: int, m: float, gamma: float, ell: float) -> complex:
    q2 = k**2 + (math.pi / ell) ** 2 * l**2
    return complex(-gamma * m**3 * q2 * (q2 - 1.0), -k)


def zero_mean_modes(lat: Lattice) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    mask = spectral.mode_mask(lat, exclude=[(0, 0)])
    rows, cols = np.nonzero(mask)
    return mask, [(int(r) - lat.K, int(c)) for r, c in zip(rows, cols)]


def _check_size(n: int) -> None:
    cap = matrix_size_cap()
    if n > cap:
        raise ValueError(f"operator of size {n} exceeds RIMFLOW_MAX_MATRIX={cap}")


def assemble_L0(m: float, gamma: float, ell: float, K: int, L: int, frame: str = "lab") -> np.ndarray:
    """Diagonal linearization about the constant m on the zero-mean half lattice."""
    lat = get_lattice(K, L, ell)
    _, modes = zero_mean_modes(lat)
    _check_size(len(modes))
    diag = np.array([lambda_closed_form(k, l, m, gamma, ell) for k, l in modes])
    if frame == "comoving":
        diag = diag + 1j * np.array([k for k, _ in modes], dtype=float)
    return np.diag(diag)


def retruncate(f: SpectralField, K: int, L: int) -> SpectralField:
    """Embed f into the (K, L) lattice, padding with zeros or dropping modes."""
    if (K, L) == (f.K, f.L):
        return f
    lat = get_lattice(K, L, f.ell)
    c = np.zeros(lat.shape, dtype=complex)
    kk, ll = min(K, f.K), min(L, f.L)
    c[K - kk : K + kk + 1, : ll + 1] = f.coeffs[f.K - kk : f.K + kk + 1, : ll + 1]
    return SpectralField.wrap(c, lat, real=f.real)


def assemble_Ldelta(
    H_delta: SpectralField,
    p: Params,
    K: Optional[int] = None,
    L: Optional[int] = None,
    frame: str = "lab",
) -> np.ndarray:
    """
    Dense matrix of the linearization about H_delta on the zero-mean lattice,
    built by applying the operator to every basis mode.
    """
    H = retruncate(H_delta, K or H_delta.K, L or H_delta.L)
    lat = H.lattice
    mask, modes = zero_mean_modes(lat)
    _check_size(len(modes))
    A = spectral.assemble_matrix(linearization_kernel(H, p.gamma, p.delta), lat, mask)
    if frame == "comoving":
        A = A + np.diag(1j * np.array([k for k, _ in modes], dtype=float))
    return A


def lambda2(m: float, gamma: float) -> complex:
    den = 1.0 + 144.0 * gamma**2 * m**6
    return complex(-81.0 * gamma * m**7 / den, -(108.0 * gamma**2 * m**10 + 7.5 * m**4) / den)


def critical_eigenvalue_expansion(m: float, gamma: float, delta: float) -> complex:
    """i + delta^2 lambda_2 on the +i branch; the -i branch is its conjugate."""
    return 1j + delta**2 * lambda2(m, gamma)


def critical_mode_correction(m: float, gamma: float) -> complex:
    """Coefficient of e^{-2i theta} in the first-order eigenmode correction."""
    return complex(3.0 * m**2, -36.0 * gamma * m**5) / (1.0 + 144.0 * gamma**2 * m**6)


def eigensolve(
    matrix: np.ndarray,
    modes: Optional[Sequence[Tuple[int, int]]] = None,
    params: Optional[Params] = None,
    frame: str = "lab",
) -> SpectrumReport:
    """
    Dense eigendecomposition with per-pair residuals.

    Pairs are checked against max(1e-8, 1e-12 * ||A||_F); the dominant mode
    of each eigenvector is its largest coefficient.
    """
    n = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    _check_size(n)
    try:
        w, v = linalg.eig(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        cond = float(np.linalg.cond(matrix))
        raise EigenSolveError(f"eigensolver failed ({e}); condition number {cond:.3e}") from e

    norm_a = float(np.linalg.norm(matrix))
    tol = max(1e-8, 1e-12 * norm_a)
    residuals = np.linalg.norm(matrix @ v - v * w[None, :], axis=0) / np.linalg.norm(v, axis=0)
    worst = float(np.max(residuals)) if n else 0.0
    if worst > tol:
        raise EigenSolveError(f"eigenpair residual {worst:.3e} exceeds {tol:.3e}")

    dominant = np.argmax(np.abs(v), axis=0)
    entries = []
    for j in np.argsort(-w.real, kind="stable"):
        mode = modes[dominant[j]] if modes is not None else (int(dominant[j]), 0)
        entries.append(EigenEntry(value=complex(w[j]), mode=mode, residual=float(residuals[j])))

    counts = {kind: 0 for kind in Stability}
    for e in entries:
        counts[classify(e.value)] += 1
    logger.info(
        "eigensolve n=%d: %d unstable, %d critical, %d stable (max residual %.2e)",
        n,
        counts[Stability.UNSTABLE],
        counts[Stability.CRITICAL],
        counts[Stability.STABLE],
        worst,
    )
    return SpectrumReport(eigenvalues=entries, classification=counts, params=params, frame=frame)


def spectrum_of_steady(H_delta: SpectralField, p: Params, frame: str = "lab") -> SpectrumReport:
    _, modes = zero_mean_modes(H_delta.lattice)
    return eigensolve(assemble_Ldelta(H_delta, p, frame=frame), modes=modes, params=p, frame=frame)


def spectrum_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance in the metric |x - y| / (1 + |x|)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    d = np.abs(a[:, None] - b[None, :])
    ab = np.max(np.min(d / (1.0 + np.abs(a[:, None])), axis=1))
    ba = np.max(np.min(d / (1.0 + np.abs(b[None, :])), axis=0))
    return float(max(ab, ba))


def conjugation_defect(values: np.ndarray) -> float:
    """Largest distance from an eigenvalue's conjugate to the spectrum."""
    values = np.asarray(values, dtype=complex)
    d = np.abs(np.conj(values)[:, None] - values[None, :])
    return float(np.max(np.min(d, axis=1)))


def write_spectrum(path: Path, report: SpectrumReport) -> Path:
    return write_csv(path, SPECTRUM_HEADER, (e.row() for e in report.eigenvalues))
