import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

import harness
from errors import SweepError
from harness import (
    AlphaVerdict,
    RunBundle,
    VerdictKind,
    classify,
    config_hash,
    evaluate_alpha,
    resolve_moment,
    run_single,
    run_sweep,
    series_frame,
    summarize,
)
from initdata import InitCheck
from schemas import (
    AlphaBisection,
    ConcentrationSearch,
    InitialProfile,
    ProfileKind,
    RunConfig,
    SolverControls,
    SweepConfig,
)
from solver_w import RunOutcome, RunStatus, Series
from tests.helpers import make_params
from transform import MassGrid

INDICATOR = InitialProfile(kind=ProfileKind.INDICATOR, R0=0.3)
UNIFORM = InitialProfile(kind=ProfileKind.UNIFORM)


def small_run(name="small", profile=INDICATOR, alpha=0.2):
    return RunConfig(
        name=name,
        params=make_params(n=3, alpha=alpha),
        profile=profile,
        N=64,
        controls=SolverControls(t_end=0.01, snapshot_every=0.0025, dt_max=1e-3),
    )


def sweep_config(**overrides):
    values = dict(
        name="sweep",
        n=3,
        alphas=[0.1, 0.3],
        profile=UNIFORM,
        grid_sizes=[32, 64],
        controls=SolverControls(t_end=0.05),
    )
    values.update(overrides)
    return SweepConfig(**values)


def fake_bundle(status, sup_u, t_est=None, name="fake", resolution_limited=False):
    sup_u = np.asarray(sup_u, dtype=np.float64)
    t = np.linspace(0.0, 1.0, sup_u.size)
    series = Series(t=t, sup_u=sup_u, mass=np.ones_like(t), min_z=np.zeros_like(t), dt=np.full_like(t, 0.1))
    outcome = RunOutcome(status=status, snapshots=[], series=series, steps=sup_u.size - 1, t_est=t_est,
                         reason=None if status != RunStatus.STEP_FAILURE else "max_steps exhausted",
                         resolution_limited=resolution_limited)
    cfg = small_run(name=name)
    return RunBundle(config=cfg, params=cfg.params, grid=MassGrid.graded(32, 3), outcome=outcome,
                     i1=InitCheck(passed=True, margin=0.0))


# --- одиночный прогон ---
def test_run_single_writes_results(tmp_path):
    bundle = run_single(small_run(), output_dir=tmp_path)
    directory = tmp_path / "small"

    assert bundle.outcome.status == RunStatus.COMPLETED_HORIZON
    assert bundle.i1.passed and bundle.concentration.passed
    assert bundle.moment is not None and bundle.lemma4
    assert set(bundle.files) >= {"series", "lemma4", "snapshot_0"}

    snapshot = pd.read_csv(directory / "snapshots" / "snapshot_0.csv")
    assert list(snapshot.columns) == ["s", "w", "z", "u"]
    assert len(snapshot) == 65

    series = pd.read_csv(directory / "series.csv")
    assert list(series.columns) == harness.SERIES_COLUMNS
    assert series["phi"].notna().sum() == len(bundle.outcome.snapshots)

    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config_hash"] == config_hash(bundle.config)
    assert manifest["verdicts"]["run"]["status"] == "completed_horizon"
    lemma4 = json.loads((directory / "lemma4.json").read_text(encoding="utf-8"))
    assert {"t", "lhs", "rhs", "margin", "tol"} <= set(lemma4[0])


def test_run_single_is_reproducible(tmp_path):
    run_single(small_run(), output_dir=tmp_path / "a")
    run_single(small_run(), output_dir=tmp_path / "b")
    for name in ("series.csv", "lemma4.json", "manifest.json", "snapshots/snapshot_1.csv"):
        assert (tmp_path / "a" / "small" / name).read_bytes() == (tmp_path / "b" / "small" / name).read_bytes()


def test_run_single_without_writing(output_root):
    bundle = run_single(small_run(), write=False)
    assert not output_root.exists()
    assert bundle.files == {}


def test_config_hash_is_stable():
    assert config_hash(small_run()) == config_hash(small_run())
    assert config_hash(small_run()) != config_hash(small_run(alpha=0.21))
    assert len(config_hash(small_run())) == 64


def test_resolve_moment_defaults():
    params = make_params(n=3, alpha=0.2)
    window, moment = resolve_moment(small_run(), params)
    assert moment.gamma == pytest.approx(window.midpoint)
    assert moment.s0 == pytest.approx(2.0 * 0.3 ** 3)

    wide = small_run(profile=InitialProfile(kind=ProfileKind.INDICATOR, R0=0.8))
    assert resolve_moment(wide, params)[1].s0 == 0.25

    window, moment = resolve_moment(small_run(alpha=0.3), make_params(n=3, alpha=0.3))
    assert window.empty and moment is None


def test_series_frame_without_moments():
    frame = series_frame(fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 1.0, 1.0]).outcome)
    assert list(frame.columns) == harness.SERIES_COLUMNS
    assert frame["phi"].isna().all()


# --- вердикты ---
def test_classify_blowup_resolved_under_refinement():
    bundles = [fake_bundle(RunStatus.BLOWUP_DETECTED, [1.0, 500.0], t_est=t) for t in (0.100, 0.101)]
    verdict = classify(0.1, sweep_config(), bundles)
    assert verdict.verdict == VerdictKind.BLOWUP
    assert verdict.t_est == 0.101
    assert verdict.refinement_delta < 0.05
    assert len(verdict.runs) == 2


def test_classify_unresolved_blowup_is_inconclusive():
    bundles = [fake_bundle(RunStatus.BLOWUP_DETECTED, [1.0, 500.0], t_est=t) for t in (0.1, 0.2)]
    assert classify(0.1, sweep_config(), bundles).verdict == VerdictKind.INCONCLUSIVE


def test_classify_bounded_and_growing():
    settled = [fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 3.0, 2.0, 2.0, 1.9]) for _ in range(2)]
    assert classify(0.3, sweep_config(), settled).verdict == VerdictKind.BOUNDED

    growing = [
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 2.0, 3.0, 4.0, 5.0]),
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 2.0, 3.0, 4.0, 6.0]),
    ]
    verdict = classify(0.3, sweep_config(), growing)
    assert verdict.verdict == VerdictKind.INCONCLUSIVE
    assert verdict.sup_u_max == 6.0


def test_classify_mixed_statuses_and_critical_alpha():
    mixed = [
        fake_bundle(RunStatus.BLOWUP_DETECTED, [1.0, 500.0], t_est=0.1),
        fake_bundle(RunStatus.STEP_FAILURE, [1.0, 2.0]),
    ]
    verdict = classify(0.1, sweep_config(), mixed)
    assert verdict.verdict == VerdictKind.INCONCLUSIVE
    assert "max_steps exhausted" in verdict.reason

    settled = [fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 1.0, 1.0]) for _ in range(2)]
    verdict = classify(0.25, sweep_config(), settled)
    assert verdict.verdict == VerdictKind.INCONCLUSIVE
    assert verdict.reason == "alpha is exactly critical"


def test_classify_bounded_compares_horizon_values():
    # начальный пик зависит от сетки, значение на горизонте нет
    bundles = [
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 4.0, 2.0, 2.0, 2.001]),
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 6.0, 2.0, 2.0, 2.001]),
    ]
    verdict = classify(0.3, sweep_config(), bundles)
    assert verdict.verdict == VerdictKind.BOUNDED
    assert verdict.refinement_delta == 0.0
    assert verdict.sup_u_max == 6.0


def test_classify_saturated_run_is_inconclusive():
    bundles = [
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 1.0, 1.0]),
        fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 1.0, 1.0], resolution_limited=True),
    ]
    verdict = classify(0.1, sweep_config(), bundles)
    assert verdict.verdict == VerdictKind.INCONCLUSIVE
    assert verdict.reason == "solution saturated at grid resolution"
    assert verdict.runs[1].resolution_limited
    assert not summarize(bundles[0]).resolution_limited


# --- развёртка ---
def test_sweep_over_list_with_uniform_data(tmp_path):
    report = run_sweep(sweep_config(), output_dir=tmp_path)
    assert [v.alpha for v in report.verdicts] == [0.1, 0.3]
    assert all(v.verdict == VerdictKind.BOUNDED for v in report.verdicts)
    assert report.bracket is None
    assert report.critical_alpha == pytest.approx(0.25)
    assert (tmp_path / "sweep" / "sweep_report.json").exists()
    manifest = json.loads((tmp_path / "sweep" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config_hash"] == report.config_hash


def concentration_sweep():
    return sweep_config(profile=INDICATOR, concentration=ConcentrationSearch(radii=[0.1, 0.3, 0.05]))


def fake_run_single(threshold, calls):
    def run(cfg, output_dir=None, write=True, diagnostics=True):
        R0 = cfg.profile.R0
        calls.append((R0, cfg.N))
        if R0 <= threshold:
            return fake_bundle(RunStatus.BLOWUP_DETECTED, [1.0, 500.0], t_est=0.1, name=cfg.name)
        return fake_bundle(RunStatus.COMPLETED_HORIZON, [1.0, 1.0, 1.0], name=cfg.name)
    return run


def test_evaluate_alpha_narrows_data_until_blowup(monkeypatch):
    calls = []
    monkeypatch.setattr(harness, "run_single", fake_run_single(0.1, calls))
    verdict = evaluate_alpha(0.1, concentration_sweep())
    assert verdict.verdict == VerdictKind.BLOWUP
    assert verdict.R0 == 0.1
    assert calls == [(0.3, 32), (0.3, 64), (0.1, 32), (0.1, 64)]
    assert all("_R0.1" in run.name for run in verdict.runs)


def test_evaluate_alpha_reports_most_concentrated_radius(monkeypatch):
    calls = []
    monkeypatch.setattr(harness, "run_single", fake_run_single(0.0, calls))
    verdict = evaluate_alpha(0.3, concentration_sweep())
    assert verdict.verdict == VerdictKind.BOUNDED
    assert verdict.R0 == 0.05
    assert [R0 for R0, _ in calls] == [0.3, 0.3, 0.1, 0.1, 0.05, 0.05]


def test_evaluate_alpha_without_search_keeps_profile(monkeypatch):
    calls = []
    monkeypatch.setattr(harness, "run_single", fake_run_single(0.5, calls))
    verdict = evaluate_alpha(0.1, sweep_config(profile=INDICATOR))
    assert verdict.R0 is None
    assert calls == [(0.3, 32), (0.3, 64)]


@pytest.mark.parametrize("radii", [[], [0.1, -0.2], [0.1, 0.1]])
def test_concentration_search_validation(radii):
    with pytest.raises(ValidationError):
        ConcentrationSearch(radii=radii)


def test_concentration_search_order():
    assert ConcentrationSearch(radii=[0.05, 0.1, 0.07]).ordered == [0.1, 0.07, 0.05]


def fake_evaluate(rule):
    def evaluate(alpha, sweep):
        return AlphaVerdict(alpha=alpha, verdict=rule(alpha))
    return evaluate


def bisection_sweep():
    return sweep_config(alphas=None, bisection=AlphaBisection(lo=0.05, hi=0.45, tol=0.05))


def test_bisection_brackets_threshold(monkeypatch):
    def rule(alpha):
        return VerdictKind.BLOWUP if alpha < 0.27 else VerdictKind.BOUNDED

    monkeypatch.setattr(harness, "evaluate_alpha", fake_evaluate(rule))
    report = run_sweep(bisection_sweep(), write=False)
    lo, hi = report.bracket
    assert lo < 0.27 < hi
    assert hi - lo <= 0.05
    assert report.bisection_complete


def test_bisection_requires_consistent_endpoints(monkeypatch):
    monkeypatch.setattr(harness, "evaluate_alpha", fake_evaluate(lambda alpha: VerdictKind.BOUNDED))
    with pytest.raises(SweepError):
        run_sweep(bisection_sweep(), write=False)


def test_bisection_stops_at_inconclusive_midpoint(monkeypatch):
    def rule(alpha):
        if alpha <= 0.05:
            return VerdictKind.BLOWUP
        if alpha >= 0.45:
            return VerdictKind.BOUNDED
        return VerdictKind.INCONCLUSIVE

    monkeypatch.setattr(harness, "evaluate_alpha", fake_evaluate(rule))
    report = run_sweep(bisection_sweep(), write=False)
    assert report.bracket == (0.05, 0.45)
    assert not report.bisection_complete
    assert len(report.verdicts) == 3


@pytest.mark.parametrize(
    "overrides",
    [
        {"bisection": AlphaBisection(lo=0.1, hi=0.4)},
        {"alphas": None},
        {"alphas": []},
        {"grid_sizes": [16, 32]},
        {"grid_sizes": [64]},
        {"n": 1, "alphas": None, "bisection": AlphaBisection(lo=0.1, hi=0.4)},
        {"concentration": ConcentrationSearch(radii=[0.1, 0.05])},
        {"profile": INDICATOR, "concentration": ConcentrationSearch(radii=[1.0, 0.1])},
    ],
)
def test_sweep_config_validation(overrides):
    with pytest.raises(ValidationError):
        sweep_config(**overrides)


def test_bisection_interval_must_be_ordered():
    with pytest.raises(ValidationError):
        AlphaBisection(lo=0.4, hi=0.1)
