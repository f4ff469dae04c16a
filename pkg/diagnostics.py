# diagnostics.py
# Функционалы phi, psi и исполняемые проверки неравенств для момента
#   phi(t) = int_0^{s0} s^(-gamma) (s0 - s) z(s, t) ds.
# Все интегралы с особым весом s^(-beta) считаются точно на каждой ячейке
# против кусочно-линейного интерполянта (на первой ячейке: степенного).
# Проверка степенных неравенств использует степенной интерполянт на всех ячейках.
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import DomainError
from models import LimiterSpec, Params, lemma6_k, lemma17_c3
from schemas import MomentConfig
from solver_w import RunOutcome, RunStatus
from transform import MassGrid, WState, density_from_w, first_derivative, limiter_argument, shifted

logger = logging.getLogger(__name__)

# Допуск неравенств относительно масштаба участвующих величин
INEQUALITY_RTOL = 1e-3
# Порог (i1) относительно mu R^n / n
I1_RTOL = 1e-12
GROWTH_DECADE = 10.0
MIN_GROWTH_SAMPLES = 10
# нижняя граница поиска s0 в единицах s_1
GROWTH_SEARCH_CELLS = 16.0


class InequalityRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    lhs: float
    rhs: float
    margin: float = Field(..., description="lhs - rhs")
    tol: float

    @property
    def ok(self) -> bool:
        return self.margin >= -self.tol


class GrowthFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: str = Field(..., description="ok | inconclusive")
    q: Optional[float] = Field(None, description="Наклон log phi' по log phi")
    residual: Optional[float] = Field(None, description="Среднеквадратичная невязка подгонки")
    samples: int = 0
    reason: Optional[str] = None

    @property
    def superlinear(self) -> bool:
        return self.status == "ok" and self.q is not None and self.q > 1.0


# --- квадратура с особым весом ---
def _power_moment(a: np.ndarray, b: np.ndarray, p) -> np.ndarray:
    """int_a^b s^(p-1) ds при a > 0 без потери точности на узких ячейках; p скаляр или по ячейкам."""
    x = np.log1p((b - a) / a)
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), x.shape)
    small = np.abs(p) < 1e-14
    safe = np.where(small, 1.0, p)
    return np.where(small, x, np.power(a, p) * np.expm1(p * x) / safe)


def _first_cell(s1: float, g1: float, s0: float, upper: float, beta: float, k: int, q: float) -> float:
    # g = g1 (s/s1)^q на [0, upper]
    if g1 == 0.0:
        return 0.0
    p = q - beta + 1.0
    if p <= 0:
        raise DomainError(f"integrand s^{q - beta:.4g} is not integrable at s = 0")
    scale = g1 * s1 ** (-q)
    if k == 0:
        return scale * upper ** p / p
    return scale * (s0 * upper ** p / p - upper ** (p + 1.0) / (p + 1.0))


def _local_exponents(a: np.ndarray, b: np.ndarray, ga: np.ndarray, gb: np.ndarray) -> np.ndarray:
    """Показатель q_j степенной функции через (a, ga) и (b, gb); NaN, если знаки не позволяют."""
    q = np.full(a.shape, np.nan)
    ok = (ga > 0) & (gb > 0)
    q[ok] = np.log(gb[ok] / ga[ok]) / np.log1p((b[ok] - a[ok]) / a[ok])
    return q


def _power_cells(a, b, ga, gb, s0: float, beta: float, k: int):
    """Интегралы по ячейкам для g = ga (s/a)^q_j; NaN там, где степенной интерполянт не определён."""
    q = _local_exponents(a, b, ga, gb)
    usable = ~np.isnan(q)
    qq = np.where(usable, q, 0.0)
    scale = np.where(usable, ga, 0.0) * np.power(a, -qq)
    first = _power_moment(a, b, qq - beta + 1.0)
    if k == 0:
        cells = scale * first
    else:
        cells = scale * (s0 * first - _power_moment(a, b, qq - beta + 2.0))
    return np.where(usable, cells, np.nan)


def singular_integral(s: np.ndarray, g: np.ndarray, s0: float, beta: float, k: int = 1,
                      q: float = 1.0, interpolation: str = "linear") -> float:
    """int_0^{s0} s^(-beta) (s0 - s)^k g(s) ds для k in {0, 1}.

    На ячейках [s_j, s_{j+1}], j >= 1, g интерполируется линейно и вес
    интегрируется в замкнутом виде. При interpolation="power" на ячейках, где
    g > 0 на обоих концах, берётся степенной интерполянт g_j (s/s_j)^(q_j):
    тогда степенные g интегрируются точно. На первой ячейке g ~ g(s_1) (s/s_1)^q:
    q задаёт главную степень g в нуле. Значение g[0] не используется.
    """
    if k not in (0, 1):
        raise DomainError("k must be 0 or 1")
    if interpolation not in ("linear", "power"):
        raise DomainError(f"unknown interpolation {interpolation!r}")
    if not 0.0 < s0 <= s[-1]:
        raise DomainError(f"s0={s0} must lie in (0, {s[-1]}]")

    m = int(np.searchsorted(s, s0, side="left"))
    if m <= 1:
        return _first_cell(s[1], float(g[1]), s0, s0, beta, k, q)

    total = _first_cell(s[1], float(g[1]), s0, s[1], beta, k, q)

    if s[m] == s0:
        nodes, vals = s[1:m + 1], g[1:m + 1]
    else:
        lo, hi = s[m - 1], s[m]
        g_end = g[m - 1] + (g[m] - g[m - 1]) * (s0 - lo) / (hi - lo)
        if interpolation == "power" and g[m - 1] > 0 and g[m] > 0:
            g_end = g[m - 1] * (s0 / lo) ** (math.log(g[m] / g[m - 1]) / math.log(hi / lo))
        nodes = np.append(s[1:m], s0)
        vals = np.append(g[1:m], g_end)
    if nodes.size < 2:
        return total

    a, b = nodes[:-1], nodes[1:]
    ga, gb = vals[:-1], vals[1:]
    h = b - a
    M0 = _power_moment(a, b, 1.0 - beta)
    M1 = _power_moment(a, b, 2.0 - beta)
    if k == 0:
        left = (b * M0 - M1) / h
        right = (M1 - a * M0) / h
    else:
        M2 = _power_moment(a, b, 3.0 - beta)
        left = (s0 * b * M0 - (s0 + b) * M1 + M2) / h
        right = (-s0 * a * M0 + (s0 + a) * M1 - M2) / h
    cells = left * ga + right * gb

    if interpolation == "power":
        power = _power_cells(a, b, ga, gb, s0, beta, k)
        cells = np.where(np.isnan(power), cells, power)
    return total + float(np.sum(cells))


# --- функционалы ---
def _z_of(w: WState, grid: MassGrid, params: Params) -> np.ndarray:
    return shifted(w, grid, params).z


def phi(w: WState, cfg: MomentConfig, params: Params, grid: MassGrid) -> float:
    z = _z_of(w, grid, params)
    return singular_integral(grid.s_nodes, z, cfg.s0, cfg.gamma, k=1)


def psi(w: WState, cfg: MomentConfig, params: Params, grid: MassGrid,
        limiter: Optional[LimiterSpec] = None) -> float:
    limiter = limiter or params.limiter
    z = _z_of(w, grid, params)
    w_s = density_from_w(w, grid, params) / params.n
    factor = np.power(1.0 + limiter_argument(z, grid), -limiter.alpha)
    integrand = z * factor * w_s
    value = singular_integral(grid.s_nodes, integrand, cfg.s0, cfg.gamma, k=1)
    return params.n * limiter.kappa_lower * value


def phi_series(run: RunOutcome, cfg: MomentConfig, params: Params, grid: MassGrid,
               limiter: Optional[LimiterSpec] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi и psi во всех снимках прогона."""
    t = np.array([snap.t for snap in run.snapshots], dtype=np.float64)
    phis = np.array([phi(snap, cfg, params, grid) for snap in run.snapshots])
    psis = np.array([psi(snap, cfg, params, grid, limiter) for snap in run.snapshots])
    return t, phis, psis


def phi0_lower_bound(cfg: MomentConfig, params: Params) -> float:
    """c3 s0^(2-gamma): нижняя граница phi(0) для данных, сосредоточенных в B_R0."""
    if cfg.s0 > params.volume_s / 4.0:
        raise DomainError("s0 must not exceed R^n / 4")
    return lemma17_c3(params.n, params.R, params.mu, cfg.gamma) * cfg.s0 ** (2.0 - cfg.gamma)


# --- проверки неравенств ---
def _require_i1(z: np.ndarray, params: Params) -> None:
    if np.min(z) < -I1_RTOL * params.total_w:
        raise DomainError("profile violates w >= mu s / n")


def _snapshot_times(run: RunOutcome) -> np.ndarray:
    if len(run.snapshots) < 3:
        raise DomainError("at least three snapshots are required")
    t = np.array([snap.t for snap in run.snapshots], dtype=np.float64)
    if np.any(np.diff(t) <= 0):
        raise DomainError("snapshot times must be strictly increasing")
    return t


def _record(t: float, lhs: float, rhs: float, *scales: float) -> InequalityRecord:
    tol = INEQUALITY_RTOL * max(abs(lhs), abs(rhs), *scales)
    return InequalityRecord(t=t, lhs=lhs, rhs=rhs, margin=lhs - rhs, tol=tol)


def lemma4_rhs(w: WState, cfg: MomentConfig, params: Params, grid: MassGrid,
               limiter: Optional[LimiterSpec] = None) -> float:
    n, gamma, s = params.n, cfg.gamma, grid.s_nodes
    z = _z_of(w, grid, params)
    lead = 2.0 - 2.0 / n - gamma
    first = singular_integral(s, z, cfg.s0, 2.0 / n + gamma, k=1)
    second = singular_integral(s, z, cfg.s0, gamma + 2.0 / n - 1.0, k=0)
    return (
        -n ** 2 * lead * (gamma - 1.0 + 2.0 / n) * first
        - 2.0 * n ** 2 * lead * second
        + psi(w, cfg, params, grid, limiter)
    )


def check_lemma4(run: RunOutcome, cfg: MomentConfig, params: Params, grid: MassGrid,
                 limiter: Optional[LimiterSpec] = None) -> List[InequalityRecord]:
    """phi' (центральные разности по снимкам) против правой части оценки снизу."""
    t = _snapshot_times(run)
    _require_i1(_z_of(run.snapshots[0], grid, params), params)

    phis = np.array([phi(snap, cfg, params, grid) for snap in run.snapshots])
    dphi = first_derivative(phis, t)

    records = []
    for i in range(1, len(t) - 1):
        rhs = lemma4_rhs(run.snapshots[i], cfg, params, grid, limiter)
        records.append(_record(float(t[i]), float(dphi[i]), rhs, float(phis[i])))

    failed = sum(not r.ok for r in records)
    if failed:
        logger.warning("check_lemma4: %d of %d samples below tolerance", failed, len(records))
    return records


def check_lemma6(w: WState, cfg: MomentConfig, params: Params, grid: MassGrid,
                 limiter: Optional[LimiterSpec] = None) -> InequalityRecord:
    limiter = limiter or params.limiter
    n, alpha, gamma = params.n, limiter.alpha, cfg.gamma
    if n > 1 and not alpha < n / (2.0 * (n - 1)):
        raise DomainError(f"alpha must be below n/(2(n-1)) = {n / (2.0 * (n - 1))}")
    k = lemma6_k(n, alpha, gamma, limiter.kappa_lower)

    z = _z_of(w, grid, params)
    _require_i1(z, params)
    z = np.maximum(z, 0.0)
    s = grid.s_nodes
    a = (2.0 - 2.0 / n) * alpha

    z_s = first_derivative(z, s)
    positive = z > 0
    lhs_integrand = np.zeros_like(z)
    lhs_integrand[positive] = np.power(z[positive], 1.0 - 2.0 * alpha) * z_s[positive]
    lhs = n * limiter.kappa_lower * singular_integral(
        s, lhs_integrand, cfg.s0, gamma - a, k=1, q=1.0 - 2.0 * alpha, interpolation="power"
    )

    power = np.power(z, 2.0 - 2.0 * alpha)
    q = 2.0 - 2.0 * alpha
    rhs = k * (
        singular_integral(s, power, cfg.s0, 1.0 + gamma - a, k=1, q=q, interpolation="power")
        + singular_integral(s, power, cfg.s0, gamma - a, k=0, q=q, interpolation="power")
    )
    return _record(float(w.t), lhs, rhs)


def _second_derivative(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    h = np.diff(s)
    slopes = np.diff(values) / h
    return 2.0 * np.diff(slopes) / (h[:-1] + h[1:])


def check_lemma3(run: RunOutcome, params: Params, grid: MassGrid,
                 limiter: Optional[LimiterSpec] = None) -> List[InequalityRecord]:
    """Поточечная невязка неравенства для z во внутренних снимках (справочно).

    В каждой записи lhs = z_t и rhs = диффузия + перенос в узле с наименьшим запасом.
    """
    limiter = limiter or params.limiter
    t = _snapshot_times(run)
    n, s = params.n, grid.s_nodes
    zs = np.array([_z_of(snap, grid, params) for snap in run.snapshots])
    z_t = np.array([first_derivative(zs[:, j], t) for j in range(1, s.size - 1)]).T

    records = []
    for i in range(1, len(t) - 1):
        z = zs[i]
        w_s = density_from_w(run.snapshots[i], grid, params)[1:-1] / n
        xi = limiter_argument(z, grid)[1:-1]
        rhs = (
            n ** 2 * np.power(s[1:-1], 2.0 - 2.0 / n) * _second_derivative(z, s)
            + n * limiter.kappa_lower * z[1:-1] * np.power(1.0 + xi, -limiter.alpha) * w_s
        )
        lhs = z_t[i]
        j = int(np.argmin(lhs - rhs))
        scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
        records.append(InequalityRecord(
            t=float(t[i]), lhs=float(lhs[j]), rhs=float(rhs[j]),
            margin=float(lhs[j] - rhs[j]), tol=INEQUALITY_RTOL * scale,
        ))
    return records


# --- рост phi вблизи взрыва ---
def fit_growth_exponent(t: np.ndarray, phis: np.ndarray) -> GrowthFit:
    """Наклон log phi' против log phi на последней декаде роста phi."""
    t = np.asarray(t, dtype=np.float64)
    phis = np.asarray(phis, dtype=np.float64)
    if t.size < 3 or phis[0] <= 0 or np.max(phis) < GROWTH_DECADE * phis[0]:
        return GrowthFit(status="inconclusive", samples=int(t.size), reason="phi gained less than 10x")

    dphi = first_derivative(phis, t)
    window = (phis >= phis[-1] / GROWTH_DECADE) & (dphi > 0) & (phis > 0)
    count = int(np.count_nonzero(window))
    if count < MIN_GROWTH_SAMPLES:
        return GrowthFit(status="inconclusive", samples=count, reason="too few samples in the final decade")

    x, y = np.log(phis[window]), np.log(dphi[window])
    (slope, _), residuals, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(residuals[0] / count)) if residuals.size else 0.0
    return GrowthFit(status="ok", q=float(slope), residual=residual, samples=count)


def fit_phi_growth(run: RunOutcome, cfg: MomentConfig, params: Params, grid: MassGrid) -> GrowthFit:
    if run.status != RunStatus.BLOWUP_DETECTED:
        return GrowthFit(status="inconclusive", samples=len(run.snapshots), reason=f"run status {run.status.value}")
    t = np.array([snap.t for snap in run.snapshots], dtype=np.float64)
    phis = np.array([phi(snap, cfg, params, grid) for snap in run.snapshots])
    fit = fit_growth_exponent(t, phis)
    logger.info("fit_phi_growth: status=%s q=%s residual=%s", fit.status, fit.q, fit.residual)
    return fit


def growth_s0_values(s0: float, grid: MassGrid, count: int = 8) -> np.ndarray:
    """s0 от заданного вниз до масштаба ядра: GROWTH_SEARCH_CELLS первых ячеек сетки."""
    floor = GROWTH_SEARCH_CELLS * float(grid.s_nodes[1])
    if s0 <= floor:
        return np.array([s0])
    return np.geomspace(s0, floor, count)


def search_phi_growth(run: RunOutcome, gamma: float, params: Params, grid: MassGrid,
                      s0_values) -> Tuple[MomentConfig, GrowthFit]:
    """Перебирает s0 по убыванию до первой сверхлинейной подгонки.

    phi ограничен сверху (z <= mu R^n / n), поэтому рост в 10 раз виден только
    при s0 порядка размера ядра. Если сверхлинейного роста нет, возвращается
    подгонка для наименьшего s0.
    """
    values = sorted((float(v) for v in s0_values), reverse=True)
    if not values:
        raise DomainError("s0 search needs at least one value")
    for s0 in values:
        cfg = MomentConfig(gamma=gamma, s0=s0)
        fit = fit_phi_growth(run, cfg, params, grid)
        if fit.superlinear:
            logger.info("search_phi_growth: superlinear at s0=%.4g", s0)
            return cfg, fit
    return cfg, fit
