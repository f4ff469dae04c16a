# initdata.py
# Генераторы и проверки начальных данных.
from typing import NamedTuple

import numpy as np

from errors import DomainError
from models import Params
from schemas import InitialProfile, ProfileKind
from transform import MassGrid, accumulate, cumulative_moment

# Сглаживание индикатора: C^2-ступенька на трёх ячейках
MOLLIFIER_CELLS = 3
I1_RTOL = 1e-12


class InitCheck(NamedTuple):
    passed: bool
    margin: float


def normalize(u: np.ndarray, params: Params, grid: MassGrid) -> np.ndarray:
    """Масштабирует u так, чтобы w(R^n) = mu R^n / n в той же квадратуре, что и accumulate."""
    mass = cumulative_moment(u, grid)[-1]
    if not mass > 0:
        raise DomainError("profile has no mass to normalize")
    return u * (params.total_w / mass)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def _mollified_indicator(R0: float, grid: MassGrid) -> np.ndarray:
    r = grid.r_nodes
    k = int(np.searchsorted(r, R0, side="right")) - 1
    width = MOLLIFIER_CELLS * (r[k + 1] - r[k])
    inner = R0 - width
    if inner <= r[1]:
        raise DomainError(f"R0={R0} is too small to mollify the indicator on this grid")
    return 1.0 - _smoothstep((r - inner) / width)


def make_profile(spec: InitialProfile, params: Params, grid: MassGrid) -> np.ndarray:
    if spec.mu is not None and spec.mu != params.mu:
        raise DomainError(f"profile mean {spec.mu} differs from params.mu={params.mu}")
    if spec.R0 is not None and not spec.R0 < params.R:
        raise DomainError("R0 must be smaller than R")

    r = grid.r_nodes
    if spec.kind == ProfileKind.UNIFORM:
        return np.full_like(r, params.mu)

    if spec.kind == ProfileKind.SMOOTH_BUMP:
        raw = np.exp(-spec.sharpness * (r / spec.R0) ** 2)
    elif spec.kind == ProfileKind.INDICATOR:
        raw = _mollified_indicator(spec.R0, grid)
    else:
        raw = np.interp(r, np.asarray(spec.r_table), np.asarray(spec.u_table))
        if np.any(raw < 0):
            raise DomainError("tabulated profile must be nonnegative")

    return normalize(raw, params, grid)


def check_i1(u0: np.ndarray, params: Params, grid: MassGrid) -> InitCheck:
    """Средние по шарам B_r не меньше среднего по Omega, т.е. w0(s) >= mu s / n."""
    w0 = accumulate(u0, grid, params).w
    margin = float(np.min(w0 - params.mu * grid.s_nodes / params.n))
    return InitCheck(passed=margin >= -I1_RTOL * params.total_w, margin=margin)


def check_182(u0: np.ndarray, R0: float, params: Params, grid: MassGrid) -> InitCheck:
    """Концентрация в B_R0: w0(R0^n) >= mu R^n / (2n)."""
    if not 0 < R0 <= params.R:
        raise DomainError("R0 must lie in (0, R]")
    w0 = accumulate(u0, grid, params).w
    w_at = float(np.interp(R0 ** params.n, grid.s_nodes, w0))
    margin = w_at - 0.5 * params.total_w
    return InitCheck(passed=margin >= 0, margin=margin)


def check_171(u0: np.ndarray, s0: float, params: Params, grid: MassGrid) -> InitCheck:
    """Условие нижней оценки phi(0): s0 <= R^n / 4 и w0(s0 / 2) >= mu R^n / (2n)."""
    if not 0 < s0 <= params.volume_s / 4.0:
        raise DomainError("s0 must lie in (0, R^n / 4]")
    w0 = accumulate(u0, grid, params).w
    margin = float(np.interp(0.5 * s0, grid.s_nodes, w0)) - 0.5 * params.total_w
    return InitCheck(passed=margin >= 0, margin=margin)
