"""Tests for the linearized spectrum about constant and steady states."""

from __future__ import annotations

import math

import numpy as np
import pytest

from rimflow.common.output import read_csv
from rimflow.spectral import service as spectral
from rimflow.spectral.models import Params, get_lattice
from rimflow.spectrum.models import Stability, classify
from rimflow.spectrum.service import (
    assemble_Ldelta,
    assemble_L0,
    conjugation_defect,
    critical_eigenvalue_expansion,
    critical_mode_correction,
    eigensolve,
    lambda2,
    lambda_closed_form,
    retruncate,
    spectrum_hausdorff,
    spectrum_of_steady,
    write_spectrum,
    zero_mean_modes,
)
from rimflow.steady.service import expansion_Hdelta, newton_steady


def _constant_spectrum(ell: float, K: int = 4, L: int = 4, frame: str = "lab"):
    _, modes = zero_mean_modes(get_lattice(K, L, ell))
    return eigensolve(assemble_L0(1.0, 1.0, ell, K, L, frame=frame), modes)


class TestClosedForm:
    """Eigenvalues about a constant film."""

    def test_values(self):
        """lambda(k,l) = -gamma m^3 q^2 (q^2 - 1) - i k."""
        assert lambda_closed_form(1, 0, 1.0, 1.0, math.pi) == -1j
        assert lambda_closed_form(0, 1, 1.0, 1.0, 1.5 * math.pi) == pytest.approx(20.0 / 81.0)
        assert lambda_closed_form(2, 1, 2.0, 0.5, math.pi) == pytest.approx(complex(-4.0 * 5.0 * 4.0, -2.0))

    @pytest.mark.parametrize("ell", [math.pi / 2, math.pi, 1.5 * math.pi])
    def test_dense_solver_agrees(self, ell):
        """Every computed eigenvalue equals the closed form of its dominant mode."""
        report = _constant_spectrum(ell)
        for e in report.eigenvalues:
            assert abs(e.value - lambda_closed_form(*e.mode, 1.0, 1.0, ell)) <= 1e-10

    def test_classification_at_critical_length(self):
        """At ell = pi the stored modes (1,0), (-1,0) and (0,1) are critical."""
        report = _constant_spectrum(math.pi)
        assert report.count(Stability.CRITICAL) == 3
        assert report.count(Stability.UNSTABLE) == 0

    def test_instability_beyond_pi(self):
        """At ell = 3 pi / 2 cos(zeta) is the single unstable stored mode."""
        report = _constant_spectrum(1.5 * math.pi)
        assert report.count(Stability.UNSTABLE) == 1
        assert report.eigenvalues[0].mode == (0, 1)
        assert report.eigenvalues[0].value.real == pytest.approx(20.0 / 81.0, abs=1e-12)

    def test_comoving_removes_rotation(self):
        """The co-moving frame drops the -ik part."""
        report = _constant_spectrum(math.pi / 2, frame="comoving")
        assert np.max(np.abs(report.values().imag)) <= 1e-12

    def test_classify(self):
        """|Re| below the band counts as critical."""
        assert classify(1e-10 - 1j) == Stability.CRITICAL
        assert classify(-0.1) == Stability.STABLE
        assert classify(0.1) == Stability.UNSTABLE


class TestDenseLinearization:
    """Assembly by basis application."""

    def test_constant_state(self):
        """About a constant the dense linearization is the diagonal closed form."""
        ell = math.pi / 2
        p = Params(gamma=1.0, delta=0.0, ell=ell, mass=1.0)
        A = assemble_Ldelta(spectral.constant(1.0, 4, 4, ell), p)
        np.testing.assert_allclose(A, assemble_L0(1.0, 1.0, ell, 4, 4), atol=1e-9)

    def test_retruncate(self):
        """Padding keeps coefficients, shrinking drops high modes."""
        f = spectral.from_modes({(0, 0): 1.0, (3, 2): 0.1}, 4, 4, math.pi)
        up = retruncate(f, 6, 6)
        assert up.coeff(3, 2) == pytest.approx(0.1)
        down = retruncate(f, 2, 2)
        assert np.count_nonzero(down.coeffs) == 1

    def test_matrix_cap(self, monkeypatch):
        """Operators above RIMFLOW_MAX_MATRIX are refused."""
        monkeypatch.setenv("RIMFLOW_MAX_MATRIX", "10")
        with pytest.raises(ValueError, match="exceeds"):
            assemble_L0(1.0, 1.0, math.pi, 4, 4)

    def test_non_square(self):
        """Eigensolve wants a square matrix."""
        with pytest.raises(ValueError, match="square"):
            eigensolve(np.zeros((3, 4)))


class TestCriticalDrift:
    """The critical pair under weak gravity."""

    def test_lambda2(self):
        """lambda_2 = (-81 - 115.5 i) / 145 at m = gamma = 1."""
        assert lambda2(1.0, 1.0) == pytest.approx(complex(-81.0, -115.5) / 145.0)
        assert critical_eigenvalue_expansion(1.0, 1.0, 0.1) == pytest.approx(1j + 0.01 * lambda2(1.0, 1.0))
        assert critical_mode_correction(1.0, 1.0) == pytest.approx(complex(3.0, -36.0) / 145.0)

    def test_eigenvalue_near_minus_i(self):
        """The eigenvalue near -i moves by delta^2 conj(lambda_2) at ell = pi / 2."""
        d = 0.04
        ell = math.pi / 2
        p = Params(gamma=1.0, delta=d, ell=ell, mass=1.0)
        H = newton_steady(p, expansion_Hdelta(1.0, 1.0, d, K=12, L=2, ell=ell)).field
        report = spectrum_of_steady(H, p)
        lam = report.nearest(-1j).value
        assert abs(lam - (-1j + d**2 * lambda2(1.0, 1.0).conjugate())) <= 0.25 * d**2
        assert lam.real < 0.0
        assert conjugation_defect(report.values()) <= 1e-8


def _steady_spectrum(ell: float, delta: float, K: int = 6, L: int = 2):
    p = Params(gamma=1.0, delta=delta, ell=ell, mass=1.0)
    H = newton_steady(p, expansion_Hdelta(1.0, 1.0, delta, K=K, L=L, ell=ell)).field
    return spectrum_of_steady(H, p)


class TestSteadySpectrum:
    """Spectra about steady states with gravity."""

    def test_stable_below_critical_length(self):
        """For ell < pi every eigenvalue has negative real part."""
        report = _steady_spectrum(math.pi / 2, 0.02)
        assert report.eigenvalues[0].value.real < 0.0
        assert report.count(Stability.UNSTABLE) == 0

    def test_unstable_beyond_critical_length(self):
        """For ell > pi the cos(zeta) growth survives weak gravity."""
        report = _steady_spectrum(1.5 * math.pi, 0.02, L=4)
        assert report.count(Stability.UNSTABLE) == 1
        assert report.eigenvalues[0].value.real == pytest.approx(20.0 / 81.0, abs=1e-2)

    def test_continuous_in_delta(self):
        """A step of 1e-3 in delta moves the spectrum by O(1e-3) in the relative Hausdorff metric."""
        a = _steady_spectrum(math.pi / 2, 0.02).values()
        b = _steady_spectrum(math.pi / 2, 0.021).values()
        assert 0.0 < spectrum_hausdorff(a, b) <= 1e-2


class TestSpectrumUtilities:
    """Comparisons and output."""

    def test_hausdorff(self):
        """Identical spectra are at distance zero; the metric is relative."""
        a = np.array([1.0, -2.0 + 1j])
        assert spectrum_hausdorff(a, a) == 0.0
        assert spectrum_hausdorff(np.array([100.0]), np.array([101.0])) == pytest.approx(1.0 / 101.0)

    def test_conjugation_defect(self):
        """Conjugate-closed sets have no defect."""
        assert conjugation_defect(np.array([1j, -1j, 2.0])) == 0.0
        assert conjugation_defect(np.array([1j])) == pytest.approx(2.0)

    def test_write_spectrum(self, tmp_path):
        """One row per eigenvalue, ordered by decreasing real part."""
        report = _constant_spectrum(math.pi, K=2, L=2)
        header, rows = read_csv(write_spectrum(tmp_path / "spectrum.csv", report))
        assert header == ["re", "im", "k_dominant", "l_dominant", "residual"]
        assert rows.shape == (14, 5)
        assert np.all(np.diff(rows[:, 0]) <= 0.0)
