# harness.py
# Оркестрация экспериментов: одиночный прогон с диагностикой, развёртка по alpha
# с бисекцией, запись результатов и манифеста.
import enum
import hashlib
import json
import logging
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

import config
from diagnostics import (
    GrowthFit,
    InequalityRecord,
    check_lemma4,
    growth_s0_values,
    phi0_lower_bound,
    phi_series,
    search_phi_growth,
)
from errors import DomainError, KSFluxError, SweepError
from initdata import InitCheck, check_182, check_i1, make_profile
from models import GammaWindow, LimiterSpec, Params, critical_alpha, gamma_window
from schemas import MomentConfig, RunConfig, RunSummary, SweepConfig
from solver_primal import RadialState, elliptic_solve
from solver_w import MassSolver, RunOutcome, RunStatus
from transform import MassGrid, accumulate, density_from_w, shifted

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
SERIES_COLUMNS = ["t", "sup_u", "mass", "min_z", "dt", "phi", "psi"]


# --- результаты ---
class VerdictKind(str, enum.Enum):
    BLOWUP = "blowup"
    BOUNDED = "bounded"
    INCONCLUSIVE = "inconclusive"


class AlphaVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    verdict: VerdictKind
    R0: Optional[float] = Field(None, description="Радиус концентрации, на котором получен вердикт")
    t_est: Optional[float] = Field(None, description="Оценка момента взрыва на самой мелкой сетке")
    refinement_delta: Optional[float] = Field(None, description="Относительное расхождение t_est между сетками")
    sup_u_max: Optional[float] = None
    reason: Optional[str] = None
    runs: List[RunSummary] = Field(default_factory=list)


class SweepReport(BaseModel):
    name: str
    n: int
    critical_alpha: Optional[float] = None
    verdicts: List[AlphaVerdict]
    bracket: Optional[Tuple[float, float]] = Field(None, description="Эмпирический интервал для критического alpha")
    bisection_complete: bool = False
    config_hash: str
    version: str


class Manifest(BaseModel):
    config: Dict[str, Any]
    version: str
    config_hash: str
    files: Dict[str, str]
    verdicts: Dict[str, Any] = Field(default_factory=dict)


@dataclass(eq=False)
class RunBundle:
    config: RunConfig
    params: Params
    grid: MassGrid
    outcome: RunOutcome
    i1: InitCheck
    concentration: Optional[InitCheck] = None
    window: Optional[GammaWindow] = None
    moment: Optional[MomentConfig] = None
    moments: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    lemma4: List[InequalityRecord] = field(default_factory=list)
    growth: Optional[GrowthFit] = None
    growth_moment: Optional[MomentConfig] = None
    phi0_bound: Optional[float] = None
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def phi0(self) -> Optional[float]:
        return None if self.moments is None else float(self.moments[1][0])


# --- происхождение ---
def config_hash(model: BaseModel) -> str:
    payload = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def version_string() -> str:
    """git describe, если каталог под git; иначе версия пакета."""
    try:
        out = subprocess.check_output(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            text=True,
            stderr=subprocess.DEVNULL,
        )
        return out.strip() or config.__version__
    except (OSError, subprocess.CalledProcessError):
        return config.__version__


# --- запись файлов ---
def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    except OSError as e:
        raise KSFluxError(f"cannot write {path}: {e}") from e


def _write_text(text: str, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise KSFluxError(f"cannot write {path}: {e}") from e


def write_snapshots(outcome: RunOutcome, grid: MassGrid, params: Params, directory: Path) -> List[Path]:
    paths = []
    for k, snap in enumerate(outcome.snapshots):
        frame = pd.DataFrame({
            "s": grid.s_nodes,
            "w": snap.w,
            "z": shifted(snap, grid, params).z,
            "u": density_from_w(snap, grid, params),
        })
        path = directory / f"snapshot_{k}.csv"
        _write_csv(frame, path)
        paths.append(path)
    return paths


def write_primal_snapshot(state: RadialState, grid: MassGrid, params: Params, path: Path) -> Path:
    frame = pd.DataFrame({"r": grid.r_nodes, "u": state.u, "vr": elliptic_solve(state, params, grid)})
    _write_csv(frame, path)
    return path


def series_frame(outcome: RunOutcome,
                 moments: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None) -> pd.DataFrame:
    """Ряды по шагам; phi и psi заполнены только в моменты снимков."""
    frame = pd.DataFrame(outcome.series.as_columns())
    if moments is None:
        frame["phi"] = np.nan
        frame["psi"] = np.nan
    else:
        t, phis, psis = moments
        extra = pd.DataFrame({"t": t, "phi": phis, "psi": psis}).drop_duplicates("t", keep="last")
        frame = frame.merge(extra, on="t", how="left")
    return frame[SERIES_COLUMNS]


def write_records(records: List[InequalityRecord], path: Path) -> Path:
    data = TypeAdapter(List[InequalityRecord]).dump_json(records, indent=2)
    _write_text(data.decode("utf-8"), path)
    return path


def write_manifest(model: BaseModel, files: Dict[str, str], verdicts: Dict[str, Any], path: Path) -> Path:
    manifest = Manifest(
        config=model.model_dump(mode="json"),
        version=version_string(),
        config_hash=config_hash(model),
        files=files,
        verdicts=verdicts,
    )
    _write_text(manifest.model_dump_json(indent=2), path)
    logger.info("manifest written to %s", path)
    return path


# --- одиночный прогон ---
def resolve_moment(cfg: RunConfig, params: Params) -> Tuple[Optional[GammaWindow], Optional[MomentConfig]]:
    """gamma по умолчанию: середина окна; s0 по умолчанию: 2 R0^n, не больше R^n/4."""
    if params.n < 2:
        return None, cfg.moment
    window = gamma_window(params.n, params.alpha)
    if cfg.moment is not None:
        return window, cfg.moment
    if window.empty:
        return window, None
    limit = params.volume_s / 4.0
    s0 = limit if cfg.profile.R0 is None else min(2.0 * cfg.profile.R0 ** params.n, limit)
    return window, MomentConfig(gamma=window.midpoint, s0=s0)


def run_single(cfg: RunConfig, output_dir: Optional[Path] = None, write: bool = True,
               diagnostics: bool = True) -> RunBundle:
    params = cfg.params
    grid = MassGrid.graded(cfg.N, params.n, params.R, cfg.grading)
    u0 = make_profile(cfg.profile, params, grid)
    i1 = check_i1(u0, params, grid)
    concentration = None
    if cfg.profile.R0 is not None:
        concentration = check_182(u0, cfg.profile.R0, params, grid)

    outcome = MassSolver(params, grid, cfg.controls).integrate(accumulate(u0, grid, params))
    bundle = RunBundle(config=cfg, params=params, grid=grid, outcome=outcome, i1=i1, concentration=concentration)

    if diagnostics:
        _attach_diagnostics(bundle)
    if write:
        directory = (output_dir or config.output_root()) / cfg.name
        write_run(bundle, directory)
    return bundle


def _attach_diagnostics(bundle: RunBundle) -> None:
    params, grid, outcome = bundle.params, bundle.grid, bundle.outcome
    window, moment = resolve_moment(bundle.config, params)
    bundle.window = window
    if moment is None or not bundle.i1.passed:
        logger.info("moment diagnostics skipped: i1=%s moment=%s", bundle.i1.passed, moment)
        return
    if moment.s0 > params.volume_s:
        raise DomainError(f"s0={moment.s0} exceeds R^n")
    bundle.moment = moment
    bundle.moments = phi_series(outcome, moment, params, grid)
    if moment.s0 <= params.volume_s / 4.0:
        bundle.phi0_bound = phi0_lower_bound(moment, params)
    if len(outcome.snapshots) >= 3:
        bundle.lemma4 = check_lemma4(outcome, moment, params, grid)
    if outcome.status == RunStatus.BLOWUP_DETECTED:
        bundle.growth_moment, bundle.growth = search_phi_growth(
            outcome, moment.gamma, params, grid, growth_s0_values(moment.s0, grid)
        )


def write_run(bundle: RunBundle, directory: Path) -> Dict[str, str]:
    files: Dict[str, str] = {}
    if bundle.config.write_snapshots:
        for path in write_snapshots(bundle.outcome, bundle.grid, bundle.params, directory / "snapshots"):
            files[path.stem] = str(path.relative_to(directory))

    series_path = directory / "series.csv"
    _write_csv(series_frame(bundle.outcome, bundle.moments), series_path)
    files["series"] = series_path.name

    if bundle.lemma4:
        files["lemma4"] = write_records(bundle.lemma4, directory / "lemma4.json").name

    summary = summarize(bundle)
    verdicts = {"run": summary.model_dump(mode="json")}
    if bundle.growth is not None:
        verdicts["growth"] = bundle.growth.model_dump(mode="json")
        verdicts["growth_s0"] = bundle.growth_moment.s0
    write_manifest(bundle.config, files, verdicts, directory / "manifest.json")
    bundle.files = files
    return files


def summarize(bundle: RunBundle) -> RunSummary:
    outcome = bundle.outcome
    window = None
    if bundle.window is not None and not bundle.window.empty:
        window = (bundle.window.lower, bundle.window.upper)
    return RunSummary(
        name=bundle.config.name,
        status=outcome.status.value,
        t_final=outcome.t_final,
        t_est=outcome.t_est,
        sup_u_max=float(np.max(outcome.series.sup_u)),
        steps=outcome.steps,
        reason=outcome.reason,
        resolution_limited=outcome.resolution_limited,
        gamma_window=window,
        phi0=bundle.phi0,
    )


# --- развёртка по alpha ---
def _run_config(sweep: SweepConfig, alpha: float, N: int, R0: Optional[float] = None) -> RunConfig:
    params = Params(n=sweep.n, R=sweep.R, mu=sweep.mu, limiter=LimiterSpec(alpha=alpha))
    profile, name = sweep.profile, f"{sweep.name}_alpha{alpha:g}_N{N}"
    if R0 is not None:
        profile = profile.model_copy(update={"R0": R0})
        name = f"{name}_R{R0:g}"
    return RunConfig(
        name=name,
        params=params,
        profile=profile,
        N=N,
        grading=sweep.grading,
        controls=sweep.controls,
        write_snapshots=False,
    )


def _tail_nonincreasing(outcome: RunOutcome, fraction: float) -> bool:
    t, sup_u = outcome.series.t, outcome.series.sup_u
    tail = sup_u[t >= t[0] + (1.0 - fraction) * (t[-1] - t[0])]
    if tail.size < 2:
        return False
    return bool(np.all(np.diff(tail) <= 1e-12 * np.max(sup_u)))


def classify(alpha: float, sweep: SweepConfig, bundles: List[RunBundle], R0: Optional[float] = None) -> AlphaVerdict:
    """Вердикт по прогонам на возрастающих сетках (последний прогон самый мелкий)."""
    policy = sweep.horizon
    runs = [summarize(b) for b in bundles]
    statuses = {b.outcome.status for b in bundles}

    if sweep.n >= 2 and math.isclose(alpha, critical_alpha(sweep.n), rel_tol=0.0, abs_tol=1e-12):
        return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.INCONCLUSIVE,
                            reason="alpha is exactly critical", runs=runs)

    if statuses == {RunStatus.BLOWUP_DETECTED}:
        t_est = [b.outcome.t_est for b in bundles]
        delta = max(abs(a - b) / b for a, b in zip(t_est[:-1], t_est[1:]))
        if delta < policy.blowup_refinement_rtol:
            return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.BLOWUP, t_est=t_est[-1],
                                refinement_delta=delta, runs=runs)
        return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.INCONCLUSIVE, refinement_delta=delta,
                            reason="blow-up time not resolved under refinement", runs=runs)

    if any(b.outcome.resolution_limited for b in bundles):
        return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.INCONCLUSIVE,
                            reason="solution saturated at grid resolution", runs=runs)

    if statuses == {RunStatus.COMPLETED_HORIZON}:
        # сравнивается sup u на горизонте: начальный пик зависит от сглаживания на сетке
        sups = [float(b.outcome.series.sup_u[-1]) for b in bundles]
        variation = max(abs(a - b) / b for a, b in zip(sups[:-1], sups[1:]))
        sup_max = float(np.max(bundles[-1].outcome.series.sup_u))
        if _tail_nonincreasing(bundles[-1].outcome, policy.bounded_tail_fraction) \
                or variation < policy.bounded_refinement_rtol:
            return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.BOUNDED, sup_u_max=sup_max,
                                refinement_delta=variation, runs=runs)
        return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.INCONCLUSIVE, sup_u_max=sup_max,
                            refinement_delta=variation, reason="sup u still growing at the horizon", runs=runs)

    reason = "; ".join(sorted({b.outcome.reason or b.outcome.status.value for b in bundles}))
    return AlphaVerdict(alpha=alpha, R0=R0, verdict=VerdictKind.INCONCLUSIVE, reason=reason, runs=runs)


def _radii(sweep: SweepConfig) -> List[Optional[float]]:
    if sweep.concentration is None:
        return [None]
    return list(sweep.concentration.ordered)


def evaluate_alpha(alpha: float, sweep: SweepConfig) -> AlphaVerdict:
    """Вердикт для одного alpha; при поиске R0 данные сужаются, пока не обнаружен взрыв."""
    verdict = None
    for R0 in _radii(sweep):
        bundles = [
            run_single(_run_config(sweep, alpha, N, R0), write=False, diagnostics=False)
            for N in sorted(sweep.grid_sizes)
        ]
        verdict = classify(alpha, sweep, bundles, R0)
        if verdict.verdict == VerdictKind.BLOWUP:
            break
        if R0 is not None:
            logger.info("alpha=%g R0=%g: %s, narrowing the data", alpha, R0, verdict.verdict.value)
    log = logger.warning if verdict.verdict == VerdictKind.INCONCLUSIVE else logger.info
    log("alpha=%g: %s %s", alpha, verdict.verdict.value, verdict.reason or "")
    return verdict


def _evaluate_task(task: Tuple[float, SweepConfig]) -> AlphaVerdict:
    return evaluate_alpha(*task)


def _evaluate_many(alphas: List[float], sweep: SweepConfig) -> List[AlphaVerdict]:
    tasks = [(alpha, sweep) for alpha in alphas]
    if sweep.workers <= 1 or len(tasks) <= 1:
        return [_evaluate_task(task) for task in tasks]
    # map сохраняет порядок параметров
    with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
        return list(pool.map(_evaluate_task, tasks))


def _list_bracket(verdicts: List[AlphaVerdict]) -> Optional[Tuple[float, float]]:
    ordered = sorted(verdicts, key=lambda v: v.alpha)
    for lower, upper in zip(ordered[:-1], ordered[1:]):
        if lower.verdict == VerdictKind.BLOWUP and upper.verdict == VerdictKind.BOUNDED:
            return lower.alpha, upper.alpha
    return None


def _bisect(sweep: SweepConfig) -> Tuple[List[AlphaVerdict], Tuple[float, float], bool]:
    spec = sweep.bisection
    lo_verdict, hi_verdict = _evaluate_many([spec.lo, spec.hi], sweep)
    if lo_verdict.verdict != VerdictKind.BLOWUP or hi_verdict.verdict != VerdictKind.BOUNDED:
        raise SweepError(
            f"bisection needs blow-up at lo={spec.lo} and boundedness at hi={spec.hi}, "
            f"got {lo_verdict.verdict.value} and {hi_verdict.verdict.value}"
        )

    verdicts = [lo_verdict, hi_verdict]
    lo, hi = spec.lo, spec.hi
    while hi - lo > spec.tol:
        mid = 0.5 * (lo + hi)
        verdict = evaluate_alpha(mid, sweep)
        verdicts.append(verdict)
        if verdict.verdict == VerdictKind.BLOWUP:
            lo = mid
        elif verdict.verdict == VerdictKind.BOUNDED:
            hi = mid
        else:
            logger.warning("bisection stopped at inconclusive alpha=%g; bracket [%g, %g]", mid, lo, hi)
            return verdicts, (lo, hi), False
        logger.info("bisection bracket [%g, %g]", lo, hi)
    return verdicts, (lo, hi), True


def run_sweep(sweep: SweepConfig, output_dir: Optional[Path] = None, write: bool = True) -> SweepReport:
    if sweep.alphas is not None:
        verdicts = _evaluate_many(list(sweep.alphas), sweep)
        bracket, complete = _list_bracket(verdicts), False
    else:
        verdicts, bracket, complete = _bisect(sweep)

    report = SweepReport(
        name=sweep.name,
        n=sweep.n,
        critical_alpha=critical_alpha(sweep.n) if sweep.n >= 2 else None,
        verdicts=verdicts,
        bracket=bracket,
        bisection_complete=complete,
        config_hash=config_hash(sweep),
        version=version_string(),
    )
    logger.info("sweep %s: bracket=%s", sweep.name, bracket)

    if write:
        root = Path(sweep.output_dir) if sweep.output_dir else (output_dir or config.output_root())
        directory = root / sweep.name
        report_path = directory / "sweep_report.json"
        _write_text(report.model_dump_json(indent=2), report_path)
        write_manifest(sweep, {"report": report_path.name},
                       {"bracket": list(bracket) if bracket else None, "bisection_complete": complete},
                       directory / "manifest.json")
    return report
