from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from rimflow.common.errors import (
    NoConvergence,
    NumericalFailure,
    PositivityError,
    SingularJacobian,
    SymmetryError,
)
from rimflow.evolve.service import rhs_coeffs
from rimflow.spectral import service as spectral
from rimflow.spectral.models import Lattice, Params, SpectralField, get_lattice
from rimflow.steady.models import ReducedSample, SteadyResult

logger = logging.getLogger("steady")

# sigma_min / max(1, sigma_max) below this is treated as a singular Jacobian
SINGULAR_TOL = 1e-12
ZETA_TOL = 1e-10

BatchOp = Callable[[np.ndarray], np.ndarray]


def stationary_residual(H: SpectralField, p: Params, rupture_eps: float = 1e-3) -> SpectralField:
    """H_theta + gamma div_l(H^3 grad_l(lap_l H + H)) - delta (H^3 cos theta)_theta."""
    lat = H.lattice
    if not math.isclose(lat.ell, p.ell, rel_tol=1e-12):
        raise ValueError(f"field ell={lat.ell} does not match params ell={p.ell}")
    return H.like(-rhs_coeffs(H.coeffs, lat, p.gamma, p.delta, 0.0, True, rupture_eps))


def stationary_linearization(H: SpectralField, p: Params) -> BatchOp:
    return linearization_kernel(H, p.gamma, p.delta)


def linearization_kernel(H: SpectralField, gamma: float, delta: float) -> BatchOp:
    """
    Derivative of the lab-frame right-hand side at H, acting on coefficient batches:

        u -> -u_theta - gamma A(P H^3) u - gamma A(P 3H^2 u) H + delta (P 3H^2 u cos theta)_theta

    The stationary residual has derivative equal to minus this map.
    """
    lat = H.lattice
    values = spectral.to_grid(H.coeffs, lat).real
    cubed = spectral.from_grid((values**3).astype(complex), lat)
    three_h2 = 3.0 * values**2
    cos_theta = np.cos(lat.theta)
    h_coeffs = H.coeffs

    def apply(u: np.ndarray) -> np.ndarray:
        ug = spectral.to_grid(u, lat)
        weighted = three_h2 * ug
        dmob = spectral.from_grid(weighted, lat)
        out = -1j * lat.k * u
        out = out - gamma * spectral.mobility_kernel(cubed, u, lat)
        out = out - gamma * spectral.mobility_kernel(dmob, h_coeffs, lat)
        if delta:
            out = out + delta * 1j * lat.k * spectral.from_grid(weighted * cos_theta, lat)
        return out

    return apply


def expansion_Hdelta(
    m: float,
    gamma: float,
    delta: float,
    K: int = 8,
    L: int = 2,
    ell: float = math.pi,
) -> SpectralField:
    """m + delta m^3 cos(theta) + delta^2 (A cos 2theta - B sin 2theta), zeta-independent."""
    lat = get_lattice(K, L, ell)
    den = 1.0 + 36.0 * gamma**2 * m**6
    A = 3.0 * m**5 / (2.0 * den)
    B = 9.0 * gamma * m**8 / den
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.index(0, 0)] = m
    c[lat.index(1, 0)] = c[lat.index(-1, 0)] = 0.5 * delta * m**3
    c[lat.index(2, 0)] = delta**2 * (0.5 * A + 0.5j * B)
    c[lat.index(-2, 0)] = delta**2 * (0.5 * A - 0.5j * B)
    H = SpectralField.wrap(c, lat)
    min_h = spectral.min_on_grid(H)
    if min_h <= 0.0:
        raise PositivityError(f"expansion is not positive at delta={delta}: min h = {min_h:.6g}", min_h=min_h)
    return H


def _check_singular(J: np.ndarray) -> None:
    sigma = linalg.svdvals(J)
    smax, smin = float(sigma[0]), float(sigma[-1])
    if smin < SINGULAR_TOL * max(1.0, smax):
        raise SingularJacobian(smin, smax)


def _newton(
    H: SpectralField,
    mask: np.ndarray,
    tol: float,
    max_iters: int,
    residual_of: Callable[[SpectralField], np.ndarray],
    linearize: Callable[[SpectralField], BatchOp],
    delta: float,
) -> Tuple[SpectralField, float, int]:
    """
    Newton iteration on the coefficients selected by mask.

    At least one update is always taken, so a singular Jacobian at the
    initial guess is reported even when the guess already solves the
    equation.
    """
    lat = H.lattice
    iters = 0
    while True:
        r = residual_of(H)
        J = spectral.assemble_matrix(linearize(H), lat, mask)
        _check_singular(J)
        du = linalg.solve(J, r[mask])
        H = H.like(spectral.symmetrize_real(H.coeffs + spectral.scatter(du, mask), what="newton update"))
        iters += 1
        rnorm = float(np.linalg.norm(np.sqrt(lat.multiplicity) * np.where(mask, residual_of(H), 0.0)))
        logger.debug("newton iter %d: residual %.3e", iters, rnorm)
        if rnorm <= tol:
            return H, rnorm, iters
        if iters >= max_iters:
            raise NoConvergence(f"newton did not converge in {max_iters} iterations", rnorm, delta)


def newton_steady(p: Params, init: SpectralField, tol: float = 1e-10, max_iters: int = 25) -> SteadyResult:
    """
    Newton solve of the stationary equation with the mean pinned to p.mass.

    The Jacobian is the dense zero-mean restriction of the linearization;
    updates are u -> u + J^{-1} R since the residual derivative is -J.
    """
    lat = init.lattice
    c = np.array(init.coeffs)
    c[lat.index(0, 0)] = p.mass
    H = init.like(c)
    mask = spectral.mode_mask(lat, exclude=[(0, 0)])

    def residual_of(field: SpectralField) -> np.ndarray:
        return stationary_residual(field, p).coeffs

    H, rnorm, iters = _newton(
        H, mask, tol, max_iters, residual_of, lambda field: stationary_linearization(field, p), p.delta
    )
    logger.info("steady state at delta=%.6g: residual %.3e after %d iterations", p.delta, rnorm, iters)
    return SteadyResult(
        field=H,
        residual_norm=rnorm,
        newton_iters=iters,
        delta=p.delta,
        min_h=spectral.min_on_grid(H),
    )


def zeta_dependence(H: SpectralField) -> float:
    return float(np.max(np.abs(H.coeffs[:, 1:]))) if H.L > 0 else 0.0


def continuation(
    deltas: Sequence[float],
    m: float,
    gamma: float,
    ell: float,
    K: int = 16,
    L: int = 2,
    tol: float = 1e-10,
    max_iters: int = 25,
) -> List[SteadyResult]:
    """
    Natural-parameter continuation in delta, seeded by the expansion for
    the first value and by the previous solution afterwards.
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        return []
    if deltas[0] < 0 or any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta values must be nonnegative and strictly increasing")

    results: List[SteadyResult] = []
    guess: Optional[SpectralField] = None
    for delta in deltas:
        p = Params(gamma=gamma, delta=delta, ell=ell, mass=m)
        try:
            if guess is None:
                guess = expansion_Hdelta(m, gamma, delta, K=K, L=L, ell=ell)
            res = newton_steady(p, guess, tol=tol, max_iters=max_iters)
        except (NumericalFailure, PositivityError) as e:
            e.delta = delta
            logger.warning("continuation failed at delta=%.6g: %s", delta, e)
            raise
        drift = zeta_dependence(res.field)
        if drift > ZETA_TOL:
            raise SymmetryError(f"steady state at delta={delta} depends on zeta: max |c(k,l>0)| = {drift:.3e}")
        results.append(res)
        guess = res.field
    return results


# ---------------------------------------------------------------------------
# reduced bifurcation function at critical lengths
# ---------------------------------------------------------------------------


def _kernel_index(ell: float) -> int:
    ratio = ell / math.pi
    n = int(round(ratio))
    if n < 1 or not math.isclose(ratio, n, rel_tol=1e-9):
        raise ValueError(f"ell/pi must be a positive integer, got {ratio:.12g}")
    return n


def reduced_f_sample(
    a: float,
    delta: float,
    m: float,
    gamma: float,
    ell: float,
    K: int = 16,
    L: int = 16,
    tol: float = 1e-12,
    max_iters: int = 25,
) -> ReducedSample:
    """
    f(a, delta): the cos(n zeta) component of the stationary residual at
    m + a cos(n zeta) + v, with v solving every other component.

    n = ell/pi. delta may be negative; the residual is defined for both signs.
    """
    n = _kernel_index(ell)
    if n > L:
        raise ValueError(f"kernel mode (0,{n}) outside lattice L={L}")
    lat: Lattice = get_lattice(K, L, ell)
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.index(0, 0)] = m
    c[lat.index(0, n)] = 0.5 * a
    H = SpectralField.wrap(c, lat)
    mask = spectral.mode_mask(lat, exclude=[(0, 0), (0, n)])

    def residual_of(field: SpectralField) -> np.ndarray:
        return -rhs_coeffs(field.coeffs, lat, gamma, delta)

    H, rnorm, iters = _newton(
        H, mask, tol, max_iters, residual_of, lambda field: linearization_kernel(field, gamma, delta), delta
    )
    f = 2.0 * residual_of(H)[lat.index(0, n)].real
    return ReducedSample(a=a, delta=delta, f=f, w_residual=rnorm, newton_iters=iters)


def lyapunov_schmidt_c(m: float, gamma: float, ell: float) -> float:
    """Closed-form d_a d_delta^2 f(0, 0)."""
    _kernel_index(ell)
    return (math.pi / ell) ** 2 * 9.0 * gamma * m**7 / (1.0 + 4.0 * gamma**2 * m**6)


def reduced_f_coefficient_fd(
    m: float,
    gamma: float,
    ell: float,
    a: float = 1e-2,
    delta: float = 1e-2,
    K: int = 16,
    L: int = 16,
) -> float:
    """
    [f(a,d) - f(-a,d)] / (a d^2), an estimate of d_a d_delta^2 f(0,0).

    f is odd in a and even in delta, so the error is O(a^2 + d^2).
    """
    plus = reduced_f_sample(a, delta, m, gamma, ell, K=K, L=L).f
    minus = reduced_f_sample(-a, delta, m, gamma, ell, K=K, L=L).f
    return (plus - minus) / (a * delta**2)
