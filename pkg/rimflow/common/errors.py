from __future__ import annotations

from typing import Optional


class RimflowError(RuntimeError):
    pass


class SymmetryError(RimflowError, ValueError):
    """Reality or even-in-zeta structure violated beyond tolerance."""


class PositivityError(RimflowError, ValueError):
    def __init__(self, message: str, min_h: Optional[float] = None) -> None:
        super().__init__(message)
        self.min_h = min_h


class NumericalFailure(RimflowError):
    pass


class Rupture(NumericalFailure):
    def __init__(self, min_h: float, t: Optional[float] = None) -> None:
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"film rupture: min h = {min_h:.6g}{where}")
        self.min_h = min_h
        self.t = t


class BlowUp(NumericalFailure):
    def __init__(self, norm: float, t: Optional[float] = None) -> None:
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"blow-up: H4 norm = {norm:.6g}{where}")
        self.norm = norm
        self.t = t


class StepRejected(NumericalFailure):
    def __init__(self, error: float, tol: float, dt: float) -> None:
        super().__init__(f"step rejected: error {error:.3e} > tol {tol:.3e} (dt={dt:.3e})")
        self.error = error
        self.tol = tol
        self.dt = dt


class NoConvergence(NumericalFailure):
    def __init__(self, message: str, residual: float, delta: Optional[float] = None) -> None:
        super().__init__(message)
        self.residual = residual
        self.delta = delta


class SingularJacobian(NumericalFailure):
    def __init__(self, sigma_min: float, sigma_max: float) -> None:
        super().__init__(f"singular Jacobian: sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}")
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class InnerSolveError(NumericalFailure):
    def __init__(self, what: str, residual: float) -> None:
        super().__init__(f"{what} solve failed: residual {residual:.3e}")
        self.residual = residual


class EigenSolveError(NumericalFailure):
    pass


class ValidityExit(NumericalFailure):
    def __init__(self, margin: float, tau: Optional[float] = None) -> None:
        where = f" at tau={tau:.6g}" if tau is not None else ""
        super().__init__(f"left the positivity region (2|a1|+|b| - m = {margin:.3e}){where}")
        self.margin = margin
        self.tau = tau
