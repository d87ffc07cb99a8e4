from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from rimflow.common.errors import NumericalFailure, RimflowError
from rimflow.common.workers import run_parallel
from rimflow.evolve.models import EvolveConfig, Frame, StopReason, Trajectory
from rimflow.evolve.service import (
    convergence_bound,
    growth_rate,
    initial_field,
    integrate,
    late_plateau,
    travelling_wave_distance,
)
from rimflow.slowode.models import ManifoldPoint, OdeConfig
from rimflow.slowode.portrait import exchanges_amplitude, run_preset, spirals_inward
from rimflow.slowode.service import (
    integrate_ode,
    linearized_polar_rates,
    manifold_to_field,
    ode_rhs,
    slow_coordinates,
    solve_G1,
)
from rimflow.spectral import service as spectral
from rimflow.spectral.models import Params, get_lattice
from rimflow.spectrum.models import Stability
from rimflow.spectrum.service import (
    assemble_L0,
    eigensolve,
    lambda2,
    lambda_closed_form,
    spectrum_of_steady,
    zero_mean_modes,
)
from rimflow.steady.service import expansion_Hdelta, newton_steady, reduced_f_coefficient_fd, reduced_f_sample
from rimflow.verify.models import CheckResult, CheckStatus, Measurement, VerifyReport

logger = logging.getLogger("verify")

PI = math.pi


@dataclass
class VerifyContext:
    seed: int = 0
    out: Path = Path("out")
    rng: np.random.Generator = field(init=False)

    def __post_init__(self) -> None:
        self.rng = np.random.default_rng(self.seed)


@dataclass(frozen=True)
class Check:
    name: str
    fn: Callable[[VerifyContext], Measurement]
    slow: bool
    summary: str


CHECKS: Dict[str, Check] = {}


def check(name: str, slow: bool = False):
    def deco(fn: Callable[[VerifyContext], Measurement]):
        summary = (fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else ""
        CHECKS[name] = Check(name=name, fn=fn, slow=slow, summary=summary)
        return fn

    return deco


def _upper(measured: float, bound: float, detail: str = "") -> Measurement:
    return Measurement(measured=measured, expected=0.0, tolerance=bound, ok=bool(measured <= bound), detail=detail)


def _close(measured: float, expected: float, rel: float, detail: str = "") -> Measurement:
    ok = abs(measured - expected) <= rel * abs(expected)
    return Measurement(measured=measured, expected=expected, tolerance=rel, ok=bool(ok), detail=detail)


def _at_least(measured: float, bound: float, detail: str = "") -> Measurement:
    return Measurement(measured=measured, expected=bound, tolerance=0.0, ok=bool(measured >= bound), detail=detail)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


@check("lambda_closed_form")
def check_lambda_closed_form(ctx: VerifyContext) -> Measurement:
    """Eigenvalues of the truncated constant-state linearization equal the closed form."""

    def worst(ell: float) -> float:
        _, modes = zero_mean_modes(get_lattice(8, 8, ell))
        report = eigensolve(assemble_L0(1.0, 1.0, ell, 8, 8), modes)
        return max(abs(e.value - lambda_closed_form(e.mode[0], e.mode[1], 1.0, 1.0, ell)) for e in report.eigenvalues)

    errs = run_parallel(worst, [PI / 2, PI, 1.5 * PI])
    return _upper(max(errs), 1e-10, detail=f"per ell: {', '.join(f'{e:.2e}' for e in errs)}")


@check("instability_eigenvalue")
def check_instability_eigenvalue(ctx: VerifyContext) -> Measurement:
    """At ell = 3pi/2 exactly one stored mode, cos(zeta), is unstable with rate (4/9)(5/9)."""
    _, modes = zero_mean_modes(get_lattice(8, 8, 1.5 * PI))
    report = eigensolve(assemble_L0(1.0, 1.0, 1.5 * PI, 8, 8), modes)
    top = report.eigenvalues[0]
    expected = (4.0 / 9.0) * (5.0 / 9.0)
    err = abs(top.value.real - expected)
    ok = err <= 1e-12 and report.count(Stability.UNSTABLE) == 1 and top.mode == (0, 1)
    return Measurement(measured=top.value.real, expected=expected, tolerance=1e-12, ok=ok,
                       detail=f"mode {top.mode}, {report.count(Stability.UNSTABLE)} unstable")


def _steady(delta: float, ell: float = PI / 2, K: int = 16, L: int = 2):
    p = Params(gamma=1.0, delta=delta, ell=ell, mass=1.0)
    guess = expansion_Hdelta(1.0, 1.0, delta, K=K, L=L, ell=ell)
    return p, guess, newton_steady(p, guess)


@check("critical_drift_order")
def check_critical_drift_order(ctx: VerifyContext) -> Measurement:
    """Eigenvalue of L_delta nearest -i follows -i + delta^2 conj(lambda_2) up to higher order."""
    target = lambda2(1.0, 1.0).conjugate()

    def drift(delta: float) -> float:
        p, _, res = _steady(delta)
        lam = spectrum_of_steady(res.field, p).nearest(-1j).value
        return abs(lam - (-1j + delta**2 * target))

    e1, e2 = run_parallel(drift, [0.04, 0.02])
    ratio = e1 / e2
    return _at_least(ratio, 5.6, detail=f"errors {e1:.3e}, {e2:.3e}; order {math.log2(ratio):.2f}")


# ---------------------------------------------------------------------------
# steady
# ---------------------------------------------------------------------------


@check("steady_expansion_order")
def check_steady_expansion_order(ctx: VerifyContext) -> Measurement:
    """Newton steady state agrees with the second-order expansion to third order in delta."""

    def error(delta: float) -> float:
        _, guess, res = _steady(delta)
        return spectral.sobolev_norm(res.field - guess, 4.0)

    deltas = [1e-2, 5e-3]
    e1, e2 = run_parallel(error, deltas)
    order = math.log2(e1 / e2)
    ok = order >= 2.7 and e1 <= 10.0 * deltas[0] ** 3
    return Measurement(measured=order, expected=2.7, tolerance=0.0, ok=ok,
                       detail=f"H4 errors {e1:.3e}, {e2:.3e} (bound 10 delta^3 = {10 * deltas[0] ** 3:.1e})")


@check("reduced_f_symmetry")
def check_reduced_f_symmetry(ctx: VerifyContext) -> Measurement:
    """f(0, d) = 0, f(a, 0) = 0 and f(-a, d) = -f(a, d)."""

    def f(a: float, d: float) -> float:
        return reduced_f_sample(a, d, 1.0, 1.0, PI, K=8, L=8).f

    a, d = 2e-2, 2e-2
    values = {
        "f(0,d)": abs(f(0.0, d)),
        "f(a,0)": abs(f(a, 0.0)),
        "f(a,d)+f(-a,d)": abs(f(a, d) + f(-a, d)),
    }
    return _upper(max(values.values()), 1e-10, detail=", ".join(f"{k}={v:.2e}" for k, v in values.items()))


@check("lyapunov_schmidt_fd")
def check_lyapunov_schmidt_fd(ctx: VerifyContext) -> Measurement:
    """Finite-difference d_a d_delta^2 f(0,0) at m = gamma = 1, ell = pi equals 1.8."""
    return _close(reduced_f_coefficient_fd(1.0, 1.0, PI), 1.8, 0.02)


# ---------------------------------------------------------------------------
# slow manifold
# ---------------------------------------------------------------------------


@check("g1_oracles")
def check_g1_oracles(ctx: VerifyContext) -> Measurement:
    """G1 is (m^3/2)e^{i theta} at a constant and matches its small-amplitude expansion."""
    G1 = solve_G1(spectral.constant(1.0, 8, 8, PI), 1.0)
    expected = spectral.from_modes({(1, 0): 0.5}, 8, 8, PI, real=False)
    const_err = float(np.max(np.abs(G1.coeffs - expected.coeffs)))

    def errors(eps: float):
        Ga = solve_G1(manifold_to_field(ManifoldPoint(a1=eps), 8, 8), 1.0)
        Gb = solve_G1(manifold_to_field(ManifoldPoint(b=eps), 8, 8), 1.0)
        ea = abs(Ga.coeff(2, 0) - 3.0 * eps * (1 + 12j) / 145.0)
        eb = abs(Gb.coeff(1, 1) - 0.5 * 1.5 * eps * (1 + 2j) / 5.0)
        return ea, eb

    (a1, b1), (a2, b2) = errors(1e-2), errors(5e-3)
    order = min(math.log2(a1 / a2), math.log2(b1 / b2))
    ok = const_err <= 1e-12 and order >= 1.8
    return Measurement(measured=order, expected=1.8, tolerance=0.0, ok=ok,
                       detail=f"constant-state error {const_err:.2e}; e2i errors {a1:.2e},{a2:.2e}; cos errors {b1:.2e},{b2:.2e}")


@check("ode_linearization")
def check_ode_linearization(ctx: VerifyContext) -> Measurement:
    """Central-difference Jacobian of the slow ODE at the origin reproduces the linear rates."""
    cfg = OdeConfig(K=8, L=8)
    h = 1e-4

    def rhs(a1: complex, b: float):
        return ode_rhs(ManifoldPoint(a1=a1, b=b), 1.0, cfg)

    (ap, _), (am, _), (_, bp), (_, bm) = run_parallel(lambda x: rhs(*x), [(h, 0.0), (-h, 0.0), (0j, h), (0j, -h)])
    rate = (ap - am) / (2 * h)
    brate = (bp - bm) / (2 * h)
    rho, phi, bexp = linearized_polar_rates(1.0, 1.0)
    err = max(abs(rate.real - rho), abs(rate.imag - phi), abs(brate - bexp))
    return _upper(err, 1e-4, detail=f"rate {rate.real:.7f}{rate.imag:+.7f}i, b rate {brate:.7f}")


@check("rotational_equivariance")
def check_rotational_equivariance(ctx: VerifyContext) -> Measurement:
    """Rotating a1 by e^{i phi} rotates da1 and leaves db unchanged."""
    cfg = OdeConfig(K=8, L=8)
    draws = []
    for _ in range(20):
        phi = ctx.rng.uniform(0.0, 2 * PI)
        a1 = ctx.rng.uniform(0.0, 0.2) * np.exp(1j * ctx.rng.uniform(0.0, 2 * PI))
        b = ctx.rng.uniform(-0.3, 0.3)
        draws.append((ManifoldPoint(a1=complex(a1), b=b), phi))

    def defect(item) -> float:
        x, phi = item
        da1, db = ode_rhs(x, 1.0, cfg)
        ra1, rb = ode_rhs(x.rotated(phi), 1.0, cfg)
        return max(abs(ra1 - np.exp(1j * phi) * da1), abs(rb - db))

    return _upper(max(run_parallel(defect, draws)), 1e-10)


@check("b_invariance")
def check_b_invariance(ctx: VerifyContext) -> Measurement:
    """A slow trajectory started with b = 0 keeps b = 0."""
    traj = integrate_ode(ManifoldPoint(a1=0.1 + 0.05j), 1.0, OdeConfig(K=8, L=8, tau_end=0.5, dtau=0.05, tol=None))
    return _upper(float(np.max(np.abs(traj.b()))), 1e-12)


@check("truncation_robustness")
def check_truncation_robustness(ctx: VerifyContext) -> Measurement:
    """The slow ODE right-hand side is converged in the truncation."""
    x = ManifoldPoint(a1=0.1 + 0.05j, b=0.2)
    (a12, b12), (a16, b16) = run_parallel(lambda n: ode_rhs(x, 1.0, OdeConfig(K=n, L=n)), [12, 16])
    return _upper(max(abs(a12 - a16), abs(b12 - b16)), 1e-8)


# ---------------------------------------------------------------------------
# full equation
# ---------------------------------------------------------------------------

RELAX_INIT = "preset:cos:1,0=0.05;0,2=0.03"


@lru_cache(maxsize=8)
def _relaxation_run(delta: float, t_end: float) -> Trajectory:
    h0 = initial_field(RELAX_INIT, 8, 8, PI, 1.0)
    cfg = EvolveConfig(dt=1e-2, t_end=t_end, frame=Frame.COMOVING)
    return integrate(h0, Params(gamma=1.0, delta=delta, ell=PI, mass=1.0), cfg)


def _completed(traj: Trajectory) -> Trajectory:
    if traj.reason != StopReason.COMPLETED:
        raise NumericalFailure(f"run stopped early: {traj.message}")
    return traj


@check("conservation")
def check_conservation(ctx: VerifyContext) -> Measurement:
    """Mass is conserved and energy never increases without gravity."""
    traj = _completed(_relaxation_run(0.0, 10.0))
    drift = float(np.max(np.abs(traj.column("mass") - traj.records[0].mass)))
    rise = float(np.max(np.diff(traj.column("energy")), initial=0.0))
    ok = drift <= 1e-12 and rise <= 1e-10 and traj.energy_increases == 0
    detail = f"largest energy rise {rise:.2e}, {traj.energy_increases} accepted steps raised the energy"
    return Measurement(measured=drift, expected=0.0, tolerance=1e-12, ok=ok, detail=detail)


@check("manifold_convergence")
def check_manifold_convergence(ctx: VerifyContext) -> Measurement:
    """Distance to the slow manifold stays below the exponential decay bound."""
    traj = _completed(_relaxation_run(0.0, 10.0))
    ratio = float(np.max(traj.column("dist_M") / convergence_bound(traj, 1.0)))
    return _upper(ratio, 1.0, detail="max dist_M / bound")


@check("steady_fixed_point")
def check_steady_fixed_point(ctx: VerifyContext) -> Measurement:
    """m + 0.1 cos(zeta) at ell = pi stays put under the evolution."""
    h0 = initial_field("preset:cos:0,1=0.1", 8, 8, PI, 1.0)
    traj = _completed(integrate(h0, Params(gamma=1.0, delta=0.0, ell=PI, mass=1.0), EvolveConfig(dt=1e-2, t_end=1.0)))
    return _upper(spectral.sobolev_norm(traj.final - h0, 4.0), 1e-10)


@check("instability_growth")
def check_instability_growth(ctx: VerifyContext) -> Measurement:
    """cos(zeta) grows at the linear rate gamma m^3 (pi/ell)^2 (1 - (pi/ell)^2) at ell = 3pi/2."""
    ell = 1.5 * PI
    h0 = initial_field("preset:cos:0,1=1e-3", 8, 8, ell, 1.0)
    cfg = EvolveConfig(dt=1e-2, t_end=2.0, snapshot_every=10)
    traj = _completed(integrate(h0, Params(gamma=1.0, delta=0.0, ell=ell, mass=1.0), cfg))
    t = [0.0] + [s.t for s in traj.snapshots]
    amp = [abs(h0.coeff(0, 1))] + [abs(s.field.coeff(0, 1)) for s in traj.snapshots]
    s = (PI / ell) ** 2
    return _close(growth_rate(t, amp), s * (1.0 - s), 0.05)


@check("orbital_stability", slow=True)
def check_orbital_stability(ctx: VerifyContext) -> Measurement:
    """A lab-frame run at ell = pi/2 converges exponentially to a travelling wave."""
    ell = PI / 2
    h0 = initial_field("preset:cos:1,0=0.05;2,0=0.03", 8, 8, ell, 1.0)
    cfg = EvolveConfig(dt=1e-2, t_end=4.0, frame=Frame.LAB, snapshot_every=10, sample_every=10)
    traj = _completed(integrate(h0, Params(gamma=1.0, delta=0.0, ell=ell, mass=1.0), cfg))
    t, dist = travelling_wave_distance(traj)
    keep = t <= 0.6 * t[-1]
    slope = growth_rate(t[keep], dist[keep])
    return Measurement(measured=slope, expected=0.0, tolerance=0.0, ok=bool(slope < 0.0), detail="log-distance slope")


def plateau_halving(plateaus: Sequence[float], rel: float = 0.3) -> Measurement:
    """Every consecutive halving of delta must halve the plateau; the worst ratio is reported."""
    ratios = [a / b for a, b in zip(plateaus, plateaus[1:])]
    worst = max(ratios, key=lambda r: abs(r - 2.0))
    detail = (
        f"plateaus {', '.join(f'{p:.3e}' for p in plateaus)}; "
        f"halving ratios {', '.join(f'{r:.3f}' for r in ratios)}"
    )
    return _close(worst, 2.0, rel, detail=detail)


@check("plateau_scaling", slow=True)
def check_plateau_scaling(ctx: VerifyContext) -> Measurement:
    """Late-time distance to the manifold scales linearly in delta."""
    deltas = [0.05, 0.025, 0.0125]
    plateaus = run_parallel(lambda d: late_plateau(_completed(_relaxation_run(d, 25.0)), 8.0), deltas)
    return plateau_halving(plateaus)


def _crossval_error(delta: float, tau_end: float = 0.5, dt: float = 1e-2) -> float:
    gamma = 1.0
    x0 = ManifoldPoint(a1=0.08, b=0.05)
    H = manifold_to_field(x0, 8, 8)
    G1 = solve_G1(H, gamma)
    h0 = H.like(H.coeffs + delta * (G1.coeffs + spectral.conj_field(G1).coeffs))
    t_end = tau_end / delta**2
    every = max(1, int(t_end / dt / 100))
    cfg = EvolveConfig(dt=dt, t_end=t_end, frame=Frame.COMOVING, tol=5e-6, snapshot_every=every, sample_every=every)
    pde = _completed(integrate(h0, Params(gamma=gamma, delta=delta, ell=PI, mass=1.0), cfg))
    ode = integrate_ode(x0, gamma, OdeConfig(K=8, L=8, tau_end=tau_end, dtau=1e-2, tol=1e-8))
    scale = max(abs(x0.a1), abs(x0.b))
    worst = 0.0
    for snap in pde.snapshots:
        a1, b = slow_coordinates(snap.field, snap.t, delta, gamma)
        a1_ode, b_ode = ode.at(np.array([delta**2 * snap.t]))
        worst = max(worst, abs(a1 - a1_ode[0]), abs(b - b_ode[0]))
    return worst / scale


@check("pde_ode_crossval", slow=True)
def check_pde_ode_crossval(ctx: VerifyContext) -> Measurement:
    """The full equation started on the manifold tracks the slow ODE in tau = delta^2 t."""
    e1, e2 = run_parallel(_crossval_error, [0.05, 0.025])
    ok = e1 <= 0.15 and e2 < e1
    return Measurement(measured=e1, expected=0.0, tolerance=0.15, ok=ok, detail=f"relative error at delta/2: {e2:.3e}")


@check("fig5_spirals", slow=True)
def check_fig5_spirals(ctx: VerifyContext) -> Measurement:
    """Every fig5 trajectory spirals inward once |a1| < 0.2."""
    _, trajs = run_preset("fig5", ctx.out / "verify_fig5")
    inward = sum(1 for t in trajs if spirals_inward(t))
    return Measurement(measured=inward, expected=len(trajs), tolerance=0.0, ok=inward == len(trajs))


@check("fig7_exchange", slow=True)
def check_fig7_exchange(ctx: VerifyContext) -> Measurement:
    """Some fig7 trajectory trades amplitude between |a1| and b."""
    _, trajs = run_preset("fig7", ctx.out / "verify_fig7")
    count = sum(1 for t in trajs if exchanges_amplitude(t))
    return _at_least(count, 1.0, detail=f"{count} of {len(trajs)} trajectories non-monotone")


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


def list_checks(quick: bool = False) -> List[Check]:
    return [c for c in CHECKS.values() if not (quick and c.slow)]


def select_checks(only: Optional[Iterable[str]] = None, quick: bool = False) -> List[Check]:
    if not only:
        return list_checks(quick)
    names = list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown check(s): {', '.join(unknown)}")
    return [CHECKS[n] for n in names]


def run_check(c: Check, ctx: VerifyContext) -> CheckResult:
    start = time.perf_counter()
    try:
        m = c.fn(ctx)
    except (RimflowError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.warning("check %s raised %s: %s", c.name, type(e).__name__, e)
        return CheckResult(name=c.name, status=CheckStatus.ERROR, detail=f"{type(e).__name__}: {e}",
                           seconds=time.perf_counter() - start)
    status = CheckStatus.PASS if m.ok else CheckStatus.FAIL
    result = CheckResult(
        name=c.name,
        status=status,
        measured=m.measured,
        expected=m.expected,
        tolerance=m.tolerance,
        detail=m.detail,
        seconds=time.perf_counter() - start,
    )
    logger.info("%s %s (%.1fs)", status.value.upper(), c.name, result.seconds)
    return result


def run_checks(
    only: Optional[Iterable[str]] = None,
    quick: bool = False,
    seed: int = 0,
    out: Path = Path("out"),
) -> VerifyReport:
    ctx = VerifyContext(seed=seed, out=out)
    report = VerifyReport(seed=seed, quick=quick)
    for c in select_checks(only, quick):
        report.checks.append(run_check(c, ctx))
    return report
