from fractions import Fraction

import numpy as np
import pytest

import validation
from errors import DomainError
from initdata import check_171, make_profile
from models import GammaWindow, LimiterSpec, Params, gamma_window
from transform import MassGrid
from validation import (
    CONCENTRATED,
    check_phi0_bound,
    check_synthetic_growth,
    check_window_suite,
    feasible_s0,
    run_suite,
)


def test_window_suite_passes():
    outcome = check_window_suite(count=101)
    assert outcome.passed, outcome.detail


def test_window_suite_catches_rounded_bounds(monkeypatch):
    def shifted_window(n, alpha):
        window = gamma_window(n, alpha)
        if window.empty:
            return window
        return GammaWindow(lower=window.lower, upper=window.upper + 1e-9, empty=False)

    monkeypatch.setattr(validation, "gamma_window", shifted_window)
    assert not check_window_suite(count=21).passed


def test_exact_window_checks_interior_gammas():
    assert validation._exact_window_failures(3, 0.2) == 0
    assert validation._exact_window_failures(3, 0.3) == 0
    assert len(validation.WINDOW_FRACTIONS) >= 4
    assert all(Fraction(0) < share < Fraction(1) for share in validation.WINDOW_FRACTIONS)


def test_feasible_s0_satisfies_concentration():
    params = Params(n=3, mu=10.0, limiter=LimiterSpec(alpha=0.1))
    grid = MassGrid.graded(1024, 3)
    u0 = make_profile(CONCENTRATED, params, grid)
    values = feasible_s0(u0, params, grid, 10)
    assert values.size == 10
    assert values[-1] == pytest.approx(0.25)
    assert np.all(np.diff(values) > 0)
    assert all(check_171(u0, float(s0), params, grid).passed for s0 in values)
    assert not check_171(u0, 0.9 * values[0], params, grid).passed


def test_feasible_s0_rejects_spread_data(params3, grid3, uniform_profile):
    u0 = make_profile(uniform_profile, params3, grid3)
    with pytest.raises(DomainError):
        feasible_s0(u0, params3, grid3, 10)


def test_phi0_bound_over_gamma_and_s0():
    outcome = check_phi0_bound()
    assert outcome.passed, outcome.detail
    assert outcome.detail.startswith("0 of 10")


def test_synthetic_growth_calibration():
    assert check_synthetic_growth(0.1).passed
    assert check_synthetic_growth(0.3).passed


def test_unknown_suite():
    with pytest.raises(DomainError):
        run_suite("nonsense")
