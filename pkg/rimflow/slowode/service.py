from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from rimflow.common.errors import (
    InnerSolveError,
    NumericalFailure,
    PositivityError,
    StepRejected,
    SymmetryError,
    ValidityExit,
)
from rimflow.common.output import write_csv
from rimflow.common.retry import RetryConfig, regrow, retry_step
from rimflow.common.workers import run_parallel
from rimflow.slowode.models import (
    SLOW_ODE_HEADER,
    ManifoldPoint,
    OdeConfig,
    OdeRecord,
    OdeStopReason,
    OdeTrajectory,
)
from rimflow.spectral import service as spectral
from rimflow.spectral.models import REALITY_TOL, Lattice, SpectralField, conjugacy_defect, get_lattice

logger = logging.getLogger("slowode")

INNER_TOL = 1e-10


def manifold_to_field(x: ManifoldPoint, K: int = 16, L: int = 16, margin: float = 0.0) -> SpectralField:
    if not x.is_valid(margin):
        raise PositivityError(
            f"manifold point outside the positivity region: 2|a1|+|b| = {2 * abs(x.a1) + abs(x.b):.6g}, m = {x.m:.6g}"
        )
    lat = get_lattice(K, L, math.pi)
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.index(0, 0)] = x.m
    c[lat.index(1, 0)] = x.a1
    c[lat.index(-1, 0)] = x.a1.conjugate()
    c[lat.index(0, 1)] = 0.5 * x.b
    return SpectralField.wrap(c, lat)


def field_to_manifold(f: SpectralField) -> ManifoldPoint:
    a1, b = spectral.p1_coordinates(f)
    return ManifoldPoint(a1=a1, b=b, m=f.mean)


def _exp_theta(lat: Lattice, n: int) -> SpectralField:
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.index(n, 0)] = 1.0
    return SpectralField.wrap(c, lat, real=False)


@dataclass
class MobilityOperator:
    """
    Dense matrix of v -> A(P H0^3) v on the complex half lattice, with
    factorizations of the shifted systems cached per shift.
    """

    H0: SpectralField
    matrix: np.ndarray = field(init=False)
    _lu: Dict[complex, tuple] = field(default_factory=dict, init=False)

    def __post_init__(self) -> None:
        lat = self.lattice
        cubed = spectral.cube(self.H0).coeffs
        self.matrix = spectral.assemble_matrix(
            lambda v: spectral.mobility_kernel(cubed, v, lat),
            lat,
            spectral.mode_mask(lat),
        )

    @property
    def lattice(self) -> Lattice:
        return self.H0.lattice

    def apply(self, v: SpectralField) -> SpectralField:
        out = (self.matrix @ v.coeffs.ravel()).reshape(self.lattice.shape)
        return v.like(out)

    def solve_shifted(self, shift: complex, gamma: float, rhs: SpectralField, what: str) -> SpectralField:
        """Solve (shift + gamma A) g = rhs on the full lattice."""
        n = self.matrix.shape[0]
        system = shift * np.eye(n) + gamma * self.matrix
        if shift not in self._lu:
            self._lu[shift] = linalg.lu_factor(system)
        b = rhs.coeffs.ravel()
        g = linalg.lu_solve(self._lu[shift], b)
        res = float(np.linalg.norm(system @ g - b))
        if not np.isfinite(res) or res > INNER_TOL * max(1.0, float(np.linalg.norm(b))):
            raise InnerSolveError(what, res)
        logger.debug("%s residual %.3e", what, res)
        return SpectralField.wrap(g.reshape(self.lattice.shape), self.lattice, real=False)

    def solve_pgeq2(self, gamma: float, rhs: SpectralField) -> SpectralField:
        """Solve gamma P_{>=2} A W = P_{>=2} rhs with W in the range of P_{>=2}."""
        lat = self.lattice
        mask = spectral.pgeq2_mask(lat).ravel()
        sub = gamma * self.matrix[np.ix_(mask, mask)]
        b = rhs.coeffs.ravel()[mask]
        w = linalg.solve(sub, b)
        res = float(np.linalg.norm(sub @ w - b))
        if not np.isfinite(res) or res > INNER_TOL * max(1.0, float(np.linalg.norm(b))):
            raise InnerSolveError("W", res)
        logger.debug("W residual %.3e", res)
        c = np.zeros(lat.size, dtype=complex)
        c[mask] = w
        c = c.reshape(lat.shape)
        return SpectralField.wrap(spectral.symmetrize_real(c, what="W"), lat)


def _operator(H0: SpectralField, op: Optional[MobilityOperator]) -> MobilityOperator:
    if not H0.lattice.is_critical_length():
        raise ValueError("slow-manifold solves require ell = pi")
    if op is None:
        if spectral.min_on_grid(H0) <= 0.0:
            raise PositivityError("H0 is not positive")
        return MobilityOperator(H0)
    return op


def solve_G1(H0: SpectralField, gamma: float, op: Optional[MobilityOperator] = None) -> SpectralField:
    """i G1 + gamma A(H0^3) G1 = 1/2 (H0^3 e^{i theta})_theta."""
    op = _operator(H0, op)
    forcing = spectral.d_theta(spectral.multiply(spectral.cube(H0), _exp_theta(H0.lattice, 1))) * 0.5
    return op.solve_shifted(1j, gamma, forcing, "G1")


def solve_G2(
    H0: SpectralField, V: SpectralField, gamma: float, op: Optional[MobilityOperator] = None
) -> SpectralField:
    """2i G2 + gamma A(H0^3) G2 = V."""
    op = _operator(H0, op)
    return op.solve_shifted(2j, gamma, V, "G2")


def compute_U(H0: SpectralField, G1: SpectralField, gamma: float) -> SpectralField:
    lat = H0.lattice
    h2 = spectral.multiply(H0, H0)
    G1c = spectral.conj_field(G1)
    h2g = spectral.multiply(h2, G1)
    h2gc = spectral.multiply(h2, G1c)
    U = (
        spectral.mobility_apply(h2g, G1c) * (-3.0 * gamma)
        + spectral.mobility_apply(h2gc, G1) * (-3.0 * gamma)
        + spectral.d_theta(spectral.multiply(h2, G1, _exp_theta(lat, -1))) * 1.5
        + spectral.d_theta(spectral.multiply(h2, G1c, _exp_theta(lat, 1))) * 1.5
    )
    defect = conjugacy_defect(U.coeffs, scale=float(np.max(np.abs(h2.coeffs)) * np.max(np.abs(G1.coeffs)) ** 2))
    if defect > REALITY_TOL:
        raise SymmetryError(f"U is not real: relative conjugacy defect {defect:.3e}")
    return SpectralField.wrap(spectral.symmetrize_real(U.coeffs, check=False), lat)


def compute_V(H0: SpectralField, G1: SpectralField, gamma: float) -> SpectralField:
    lat = H0.lattice
    h2 = spectral.multiply(H0, H0)
    h2g = spectral.multiply(h2, G1)
    return spectral.mobility_apply(h2g, G1) * (-3.0 * gamma) + spectral.d_theta(
        spectral.multiply(h2, G1, _exp_theta(lat, 1))
    ) * 1.5


def solve_W(
    H0: SpectralField, U: SpectralField, gamma: float, op: Optional[MobilityOperator] = None
) -> SpectralField:
    op = _operator(H0, op)
    return op.solve_pgeq2(gamma, U)


@dataclass
class SlowEvaluation:
    H0: SpectralField
    G1: SpectralField
    U: SpectralField
    W: SpectralField
    rate: SpectralField

    @property
    def da1(self) -> complex:
        return self.rate.coeff(1, 0)

    @property
    def db(self) -> float:
        return 2.0 * self.rate.coeff(0, 1).real


def evaluate(x: ManifoldPoint, gamma: float, K: int = 16, L: int = 16) -> SlowEvaluation:
    """Full chain H0 -> G1 -> U -> W -> P1[U - gamma A(H0^3) W]."""
    H0 = manifold_to_field(x, K, L)
    op = MobilityOperator(H0)
    G1 = solve_G1(H0, gamma, op)
    U = compute_U(H0, G1, gamma)
    W = solve_W(H0, U, gamma, op)
    rate = spectral.project_P1(U - op.apply(W) * gamma)
    return SlowEvaluation(H0=H0, G1=G1, U=U, W=W, rate=rate)


def ode_rhs(x: ManifoldPoint, gamma: float, cfg: Optional[OdeConfig] = None) -> Tuple[complex, float]:
    cfg = cfg or OdeConfig()
    ev = evaluate(x, gamma, cfg.K, cfg.L)
    return ev.da1, ev.db


def linearized_polar_rates(m: float, gamma: float) -> Tuple[float, float, float]:
    """(rho'/rho, phi', b'/b) of the slow dynamics linearized at the constant state."""
    den = 1.0 + 144.0 * gamma**2 * m**6
    rho = -81.0 * gamma * m**7 / den
    phi = (108.0 * gamma**2 * m**10 + 7.5 * m**4) / den
    b = -9.0 * gamma * m**7 / (2.0 + 8.0 * gamma**2 * m**6)
    return rho, phi, b


def linearized_rhs(x: ManifoldPoint, gamma: float) -> Tuple[complex, float]:
    rho, phi, b = linearized_polar_rates(x.m, gamma)
    return complex(rho, phi) * x.a1, b * x.b


# ---------------------------------------------------------------------------
# slow-time integration
# ---------------------------------------------------------------------------


def _vector_field(gamma: float, cfg: OdeConfig, m: float):
    def f(y: np.ndarray) -> np.ndarray:
        x = ManifoldPoint.from_vector(y, m)
        if not x.is_valid(cfg.margin):
            raise ValidityExit(-x.margin())
        da1, db = ode_rhs(x, gamma, cfg)
        return np.array([da1.real, da1.imag, db])

    return f


def _rk4(f, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(
    x0: ManifoldPoint, gamma: float, cfg: Optional[OdeConfig] = None, retry: Optional[RetryConfig] = None
) -> OdeTrajectory:
    """
    Classical RK4 in slow time. With cfg.tol set, each step of size h is
    compared with two steps of size h/2 and halved until they agree; the
    run stops when the state leaves the positivity region.
    """
    cfg = cfg or OdeConfig()
    retry = retry or RetryConfig(retries=20)
    if not x0.is_valid(cfg.margin):
        raise ValidityExit(-x0.margin(), 0.0)
    f = _vector_field(gamma, cfg, x0.m)
    traj = OdeTrajectory(x0=x0, gamma=gamma)
    y, tau, h = x0.as_vector(), 0.0, cfg.dtau
    traj.records.append(OdeRecord(tau=0.0, a1=x0.a1, b=x0.b))

    def attempt(d: float) -> np.ndarray:
        full = _rk4(f, y, d)
        if cfg.tol is None:
            return full
        half = _rk4(f, _rk4(f, y, 0.5 * d), 0.5 * d)
        err = float(np.max(np.abs(full - half)))
        if err > cfg.tol:
            raise StepRejected(err, cfg.tol, d)
        return half

    while tau < cfg.tau_end * (1.0 - 1e-14):
        target = min(h, cfg.tau_end - tau)
        try:
            y_new, used = retry_step(attempt, target, retry)
        except ValidityExit as e:
            traj.reason = OdeStopReason.VALIDITY_EXIT
            traj.message = f"{e} near tau={tau:.6g}"
            break
        except StepRejected as e:
            traj.reason, traj.message = OdeStopReason.FAILED, f"step size collapsed: {e}"
            break
        if used < target:
            traj.rejected += int(round(math.log2(target / used)))
            h = regrow(used, cfg.dtau, retry)
        y, tau = y_new, tau + used
        traj.accepted += 1
        x = ManifoldPoint.from_vector(y, x0.m)
        if not x.is_valid(cfg.margin):
            traj.reason = OdeStopReason.VALIDITY_EXIT
            traj.message = f"left the positivity region at tau={tau:.6g}"
            break
        traj.records.append(OdeRecord(tau=tau, a1=x.a1, b=x.b))

    if traj.reason == OdeStopReason.COMPLETED:
        traj.message = f"reached tau={tau:.6g}"
    logger.info("slow ODE from a1=%s b=%.4g: %s", x0.a1, x0.b, traj.message)
    return traj


def slow_coordinates(H: SpectralField, t: float, delta: float, gamma: float) -> Tuple[complex, float]:
    """
    P1 coordinates of a co-moving PDE field with the fast correction
    delta (G1 e^{it} + conj(G1) e^{-it}) removed.
    """
    x = field_to_manifold(H)
    H0 = manifold_to_field(x, H.K, H.L)
    G1 = solve_G1(H0, gamma)
    fast = G1.coeffs * np.exp(1j * t) + spectral.conj_kernel(G1.coeffs) * np.exp(-1j * t)
    lat = H.lattice
    a1 = x.a1 - delta * complex(fast[lat.index(1, 0)])
    b = x.b - delta * 2.0 * float(fast[lat.index(0, 1)].real)
    return a1, b


def write_ode_trajectory(path: Path, traj: OdeTrajectory) -> Path:
    return write_csv(path, SLOW_ODE_HEADER, (r.row() for r in traj.records))


def phase_portrait(
    x0s: Sequence[ManifoldPoint],
    gamma: float,
    cfg: Optional[OdeConfig] = None,
    workers: Optional[int] = None,
) -> List[OdeTrajectory]:
    """Integrate every initial point concurrently; failures become FAILED trajectories."""
    cfg = cfg or OdeConfig()

    def run(x0: ManifoldPoint) -> OdeTrajectory:
        try:
            return integrate_ode(x0, gamma, cfg)
        except NumericalFailure as e:
            logger.warning("trajectory from a1=%s b=%.4g failed: %s", x0.a1, x0.b, e)
            return OdeTrajectory(x0=x0, gamma=gamma, reason=OdeStopReason.FAILED, message=str(e))

    return run_parallel(run, x0s, workers)
