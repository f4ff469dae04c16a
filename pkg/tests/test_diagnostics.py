import numpy as np
import pytest
from scipy import integrate, special

import diagnostics
from diagnostics import (
    GrowthFit,
    check_lemma3,
    check_lemma4,
    check_lemma6,
    fit_growth_exponent,
    fit_phi_growth,
    growth_s0_values,
    lemma4_rhs,
    phi,
    phi0_lower_bound,
    psi,
    search_phi_growth,
    singular_integral,
)
from errors import DomainError
from initdata import make_profile
from models import LimiterSpec, gamma_window, lemma6_k
from schemas import InitialProfile, MomentConfig, ProfileKind, SolverControls
from solver_w import integrate as integrate_w
from tests.helpers import bump_z, make_params, state_from_z
from transform import MassGrid, accumulate
from validation import random_monotone_profile


def quadratic_state(grid, params, c):
    s = grid.s_nodes
    return state_from_z(c * s * (params.volume_s - s), grid, params)


def stationary_run(params, grid, t_end=0.05):
    controls = SolverControls(t_end=t_end, snapshot_every=5e-3)
    return integrate_w(state_from_z(np.zeros(grid.N + 1), grid, params), params, grid, controls)


# --- квадратура ---
def test_singular_integral_of_power_law_is_exact():
    grid = MassGrid.graded(64, 3)
    s = grid.s_nodes
    # int_0^{0.5} s^(-0.4) (0.5 - s) s^0.7 ds
    expected = 0.5 * 0.5 ** 1.3 / 1.3 - 0.5 ** 2.3 / 2.3
    assert singular_integral(s, s ** 0.7, 0.5, 0.4, k=1, q=0.7) == pytest.approx(expected, rel=1e-3)
    assert singular_integral(s, 2.0 * s, 0.5, 0.4, k=0) == pytest.approx(2.0 * 0.5 ** 1.6 / 1.6, rel=1e-13)


def test_singular_integral_power_interpolation_is_exact_for_powers():
    s = MassGrid.graded(64, 3).s_nodes
    g = 3.0 * s ** 0.7
    expected_k1 = 3.0 * (0.45 * 0.45 ** 1.3 / 1.3 - 0.45 ** 2.3 / 2.3)
    expected_k0 = 3.0 * 0.45 ** 1.3 / 1.3
    assert singular_integral(s, g, 0.45, 0.4, k=1, q=0.7, interpolation="power") == pytest.approx(expected_k1, rel=1e-12)
    assert singular_integral(s, g, 0.45, 0.4, k=0, q=0.7, interpolation="power") == pytest.approx(expected_k0, rel=1e-12)


def test_singular_integral_power_falls_back_to_linear_at_zeros():
    s = MassGrid.graded(64, 3).s_nodes
    g = s * (1.0 - s)
    linear = singular_integral(s, g, 1.0, 0.4, k=0)
    power = singular_integral(s, g, 1.0, 0.4, k=0, interpolation="power")
    assert power == pytest.approx(linear, rel=1e-3)
    with pytest.raises(DomainError):
        singular_integral(s, g, 1.0, 0.4, interpolation="spline")


def test_singular_integral_rejects_bad_arguments():
    s = MassGrid.graded(64, 3).s_nodes
    with pytest.raises(DomainError):
        singular_integral(s, s, 0.5, 0.4, k=2)
    with pytest.raises(DomainError):
        singular_integral(s, s, 1.5, 0.4)
    with pytest.raises(DomainError):
        singular_integral(s, s, 0.5, 2.5)


# --- phi и psi ---
def test_phi_of_uniform_state_is_zero(params3, grid3):
    cfg = MomentConfig(gamma=0.35, s0=0.3)
    assert phi(state_from_z(np.zeros(grid3.N + 1), grid3, params3), cfg, params3, grid3) == 0.0


def test_phi_linear_oracle():
    # z = s, gamma = 1/2, s0 = 1: int_0^1 s^(-1/2) (1 - s) s ds = 4/15
    params = make_params(n=3, R=2.0)
    grid = MassGrid.graded(128, 3, R=2.0)
    state = state_from_z(grid.s_nodes.copy(), grid, params)
    value = phi(state, MomentConfig(gamma=0.5, s0=1.0), params, grid)
    assert value == pytest.approx(4.0 / 15.0, rel=1e-12)
    assert f"{value:.6f}" == "0.266667"


def test_phi_is_linear_in_z(params3, grid3):
    cfg = MomentConfig(gamma=0.3, s0=0.4)
    z1 = bump_z(grid3, params3)
    z2 = 0.02 * np.sin(np.pi * grid3.s_nodes) ** 2
    total = phi(state_from_z(z1 + 3.0 * z2, grid3, params3), cfg, params3, grid3)
    parts = phi(state_from_z(z1, grid3, params3), cfg, params3, grid3) + 3.0 * phi(
        state_from_z(z2, grid3, params3), cfg, params3, grid3
    )
    assert total == pytest.approx(parts, rel=1e-12)


def test_psi_positive_for_concentrated_state(params3, grid3):
    state = state_from_z(bump_z(grid3, params3), grid3, params3)
    assert psi(state, MomentConfig(gamma=0.35, s0=0.5), params3, grid3) > 0


def test_psi_without_limiting_matches_quad():
    params = make_params(n=3, alpha=0.0)
    grid = MassGrid.graded(512, 3)
    eps, gamma, s0 = 0.05, 0.35, 0.5
    state = state_from_z(bump_z(grid, params, eps=eps), grid, params)
    value = psi(state, MomentConfig(gamma=gamma, s0=s0), params, grid, limiter=LimiterSpec(alpha=0.0))

    def integrand(s):
        return 3.0 * eps * s * (1.0 - s) * (1.0 / 3.0 + eps * (1.0 - 2.0 * s))

    expected, _ = integrate.quad(integrand, 0.0, s0, weight="alg", wvar=(-gamma, 1.0))
    assert value == pytest.approx(expected, rel=1e-4)


def test_psi_nonnegative_on_monotone_profiles(params3, grid3):
    rng = np.random.default_rng(11)
    cfg = MomentConfig(gamma=0.35, s0=0.5)
    for _ in range(20):
        state = accumulate(random_monotone_profile(rng, params3, grid3), grid3, params3)
        assert psi(state, cfg, params3, grid3) >= 0.0


# --- оценка для интеграла с производной z ---
def test_lemma6_against_beta_functions(params3):
    grid = MassGrid.graded(4096, 3)
    alpha, gamma, c = 0.2, 0.35, 0.1
    a = (2.0 - 2.0 / 3.0) * alpha
    record = check_lemma6(quadratic_state(grid, params3, c), MomentConfig(gamma=gamma, s0=1.0), params3, grid)

    m = 1.0 - 2.0 * alpha
    beta = gamma - a
    lhs = 3.0 * c ** (2.0 - 2.0 * alpha) * (
        special.beta(m - beta + 1.0, m + 2.0) - 2.0 * special.beta(m - beta + 2.0, m + 2.0)
    )
    P = 2.0 - 2.0 * alpha
    rhs = lemma6_k(3, alpha, gamma, 1.0) * c ** P * (
        special.beta(P - gamma + a, P + 2.0) + special.beta(P - gamma + a + 1.0, P + 1.0)
    )
    assert record.lhs == pytest.approx(lhs, rel=5e-4)
    assert record.rhs == pytest.approx(rhs, rel=5e-4)
    assert record.ok


def test_lemma6_power_law_oracle(params3):
    # z = s на [0, 0.2], далее линейно до нуля в s = 1
    grid = MassGrid.graded(256, 3)
    s = grid.s_nodes
    z = np.where(s <= 0.2, s, 0.25 * (1.0 - s))
    alpha, gamma, s0 = 0.2, 0.35, 0.1
    record = check_lemma6(state_from_z(z, grid, params3), MomentConfig(gamma=gamma, s0=s0), params3, grid)

    p = (2.0 - 2.0 / 3.0) * alpha - gamma + 2.0 - 2.0 * alpha
    base = s0 ** (p + 1.0) / (p * (p + 1.0))
    assert record.lhs == pytest.approx(3.0 * base, rel=1e-9)
    assert record.rhs == pytest.approx(lemma6_k(3, alpha, gamma, 1.0) * (base + s0 ** (p + 1.0) / (p + 1.0)), rel=1e-9)
    assert record.ok


def test_lemma6_holds_on_random_profiles(params3, grid3):
    rng = np.random.default_rng(5)
    window = gamma_window(3, params3.alpha)
    for _ in range(20):
        state = accumulate(random_monotone_profile(rng, params3, grid3), grid3, params3)
        cfg = MomentConfig(gamma=float(rng.uniform(window.lower + 1e-3, window.upper)), s0=float(rng.uniform(0.05, 1.0)))
        assert check_lemma6(state, cfg, params3, grid3).ok


def test_lemma6_requires_i1(params3, grid3):
    state = state_from_z(-bump_z(grid3, params3), grid3, params3)
    with pytest.raises(DomainError):
        check_lemma6(state, MomentConfig(gamma=0.35, s0=0.5), params3, grid3)


# --- оценка для phi' ---
def test_lemma4_rhs_matches_quad():
    params = make_params(n=3, alpha=0.1)
    grid = MassGrid.graded(1024, 3)
    gamma, s0, c = 0.3, 0.5, 0.1
    state = quadratic_state(grid, params, c)
    value = lemma4_rhs(state, MomentConfig(gamma=gamma, s0=s0), params, grid)

    def z(s):
        return c * s * (1.0 - s)

    def transport(s):
        xi = c ** 2 * s ** (2.0 / 3.0) * (1.0 - s) ** 2
        return 3.0 * z(s) * (1.0 + xi) ** -0.1 * (1.0 / 3.0 + c * (1.0 - 2.0 * s))

    lead = 2.0 - 2.0 / 3.0 - gamma
    first, _ = integrate.quad(z, 0.0, s0, weight="alg", wvar=(-(2.0 / 3.0 + gamma), 1.0))
    second, _ = integrate.quad(z, 0.0, s0, weight="alg", wvar=(-(gamma - 1.0 / 3.0), 0.0))
    psi_value, _ = integrate.quad(transport, 0.0, s0, weight="alg", wvar=(-gamma, 1.0))
    expected = -9.0 * lead * (gamma - 1.0 / 3.0) * first - 18.0 * lead * second + psi_value
    assert value == pytest.approx(expected, rel=1e-4)


def test_check_lemma4_on_stationary_run(params3, grid3):
    run = stationary_run(params3, grid3)
    records = check_lemma4(run, MomentConfig(gamma=0.35, s0=0.3), params3, grid3)
    assert len(records) == len(run.snapshots) - 2
    assert all(r.margin == 0.0 and r.ok for r in records)


def test_check_lemma4_needs_three_snapshots(params3, grid3):
    run = integrate_w(
        state_from_z(np.zeros(grid3.N + 1), grid3, params3), params3, grid3, SolverControls(t_end=0.01)
    )
    assert len(run.snapshots) == 2
    with pytest.raises(DomainError):
        check_lemma4(run, MomentConfig(gamma=0.35, s0=0.3), params3, grid3)


def test_check_lemma4_on_short_concentrated_run():
    params = make_params(n=3, alpha=0.1)
    grid = MassGrid.graded(256, 3)
    u0 = make_profile(InitialProfile(kind=ProfileKind.INDICATOR, R0=0.3), params, grid)
    controls = SolverControls(t_end=0.01, snapshot_every=5e-4, dt_max=1e-4)
    run = integrate_w(accumulate(u0, grid, params), params, grid, controls)
    cfg = MomentConfig(gamma=gamma_window(3, 0.1).midpoint, s0=2.0 * 0.3 ** 3)
    records = check_lemma4(run, cfg, params, grid)
    assert records
    assert all(r.ok for r in records)


def test_check_lemma3_reports_each_interior_snapshot(params3, grid3):
    run = stationary_run(params3, grid3)
    records = check_lemma3(run, params3, grid3)
    assert len(records) == len(run.snapshots) - 2
    assert all(r.ok for r in records)


# --- рост phi ---
def test_growth_exponent_of_synthetic_blowup():
    alpha = 0.1
    t = 1.0 - np.geomspace(1.0, 1e-4, 200)
    phis = np.power(1.0 - t, -1.0 / (1.0 - 2.0 * alpha))
    fit = fit_growth_exponent(t, phis)
    assert fit.status == "ok"
    assert fit.q == pytest.approx(2.0 - 2.0 * alpha, abs=0.02)
    assert fit.superlinear
    assert fit.samples >= 10


def test_growth_exponent_inconclusive_cases():
    t = np.linspace(0.0, 1.0, 50)
    flat = fit_growth_exponent(t, 1.0 + 0.1 * t)
    assert flat.status == "inconclusive"
    assert not flat.superlinear

    sparse = fit_growth_exponent(t[:5], np.array([1.0, 2.0, 5.0, 20.0, 100.0]))
    assert sparse.status == "inconclusive"


def test_fit_phi_growth_needs_blowup(params3, grid3):
    run = stationary_run(params3, grid3)
    fit = fit_phi_growth(run, MomentConfig(gamma=0.35, s0=0.3), params3, grid3)
    assert fit.status == "inconclusive"
    assert "completed_horizon" in fit.reason


def test_growth_s0_values_reach_core_scale(grid3):
    floor = 16.0 * grid3.s_nodes[1]
    values = growth_s0_values(0.1, grid3)
    assert values.size == 8
    assert values[0] == pytest.approx(0.1)
    assert values[-1] == pytest.approx(floor)
    assert np.all(np.diff(values) < 0)
    np.testing.assert_array_equal(growth_s0_values(0.5 * floor, grid3), [0.5 * floor])


def test_search_phi_growth_stops_at_first_superlinear_fit(params3, grid3, monkeypatch):
    tried = []

    def fake_fit(run, cfg, params, grid):
        tried.append(cfg.s0)
        if cfg.s0 < 0.05:
            return GrowthFit(status="ok", q=1.6, residual=0.01, samples=12)
        return GrowthFit(status="inconclusive", samples=3, reason="phi gained less than 10x")

    monkeypatch.setattr(diagnostics, "fit_phi_growth", fake_fit)
    cfg, fit = search_phi_growth(None, 0.35, params3, grid3, [0.01, 0.1, 0.04, 0.2])
    assert tried == [0.2, 0.1, 0.04]
    assert cfg == MomentConfig(gamma=0.35, s0=0.04)
    assert fit.superlinear


def test_search_phi_growth_falls_back_to_smallest_s0(params3, grid3):
    run = stationary_run(params3, grid3)
    cfg, fit = search_phi_growth(run, 0.35, params3, grid3, [0.1, 0.02])
    assert cfg.s0 == 0.02
    assert fit.status == "inconclusive"
    with pytest.raises(DomainError):
        search_phi_growth(run, 0.35, params3, grid3, [])


def test_phi0_lower_bound(params3):
    grid = MassGrid.graded(1024, 3)
    u0 = make_profile(InitialProfile(kind=ProfileKind.INDICATOR, R0=0.3), params3, grid)
    state = accumulate(u0, grid, params3)
    window = gamma_window(3, params3.alpha)
    for gamma in np.linspace(window.lower, window.upper, 7)[1:-1]:
        cfg = MomentConfig(gamma=float(gamma), s0=2.0 * 0.3 ** 3)
        assert phi(state, cfg, params3, grid) >= phi0_lower_bound(cfg, params3) > 0

    with pytest.raises(DomainError):
        phi0_lower_bound(MomentConfig(gamma=0.35, s0=0.3), params3)
