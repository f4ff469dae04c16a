# models/exponents.py
# Замкнутые формулы для показателей: критический alpha, квадратичная форма,
# окно для gamma, показатели ОДН и явные константы.
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import DomainError

ArrayLike = Union[float, np.ndarray]


class GammaWindow(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float = Field(..., description="Нижняя граница (не включается)")
    upper: float = Field(..., description="Верхняя граница (не включается)")
    empty: bool = Field(..., description="Окно пусто")

    @property
    def midpoint(self) -> float:
        if self.empty:
            raise DomainError("gamma window is empty")
        return 0.5 * (self.lower + self.upper)


def _require_n(n: int, least: int = 2) -> None:
    if int(n) != n or n < least:
        raise DomainError(f"n must be an integer >= {least}, got {n}")


def lemma2_bound(xi: ArrayLike, alpha: float, beta: float) -> Tuple[ArrayLike, ArrayLike]:
    """(1+xi)^(-alpha) >= 1 - (alpha_+/beta) xi^beta; возвращает обе части."""
    if not (0.0 < beta <= 1.0):
        raise DomainError("beta must lie in (0, 1]")
    values = np.asarray(xi, dtype=np.float64)
    if np.any(values < 0):
        raise DomainError("xi must be nonnegative")

    lhs = np.power(1.0 + values, -alpha)
    rhs = 1.0 - (max(alpha, 0.0) / beta) * np.power(values, beta)
    if np.ndim(xi) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def critical_alpha(n: int) -> float:
    _require_n(n)
    return (n - 2) / (2.0 * (n - 1))


def quadratic_Q(n: int, alpha: float) -> float:
    _require_n(n)
    return (4.0 - 4.0 / n) * alpha ** 2 - (6.0 - 8.0 / n) * alpha + 2.0 - 4.0 / n


def window_conditions(n: int, alpha: float, gamma: float) -> Dict[str, bool]:
    """Четыре строгих условия на gamma, каждое вычисляется отдельно."""
    return {
        "unit_interval": 0.0 < gamma < 1.0,
        "above_lemma6_threshold": gamma > (2.0 - 2.0 / n) * alpha,
        "condition_13_1": (1.0 - 2.0 * alpha) * gamma < 2.0 - 4.0 / n - 4.0 * alpha + 6.0 * alpha / n,
        "condition_14_1": (1.0 - 2.0 * alpha) * gamma < 2.0 - 4.0 * alpha + 2.0 * alpha / n,
    }


def gamma_window(n: int, alpha: float) -> GammaWindow:
    _require_n(n)
    slope = 1.0 - 2.0 * alpha
    bounds = (
        2.0 - 4.0 / n - 4.0 * alpha + 6.0 * alpha / n,
        2.0 - 4.0 * alpha + 2.0 * alpha / n,
    )

    lower = max(0.0, (2.0 - 2.0 / n) * alpha)
    upper = 1.0
    infeasible = False
    for bound in bounds:
        if slope > 0:
            upper = min(upper, bound / slope)
        elif slope < 0:
            lower = max(lower, bound / slope)
        elif bound <= 0:
            # 0 * gamma < bound невозможно
            infeasible = True

    # на самой границе alpha = (n-2)/(2(n-1)) округление может дать lower < upper,
    # поэтому пустоту решает знак Q = (4-4/n)(alpha_c - alpha)(1-alpha)
    empty = infeasible or lower >= upper or alpha >= critical_alpha(n)
    return GammaWindow(lower=lower, upper=upper, empty=empty)


def _require_in_window(n: int, alpha: float, gamma: float) -> None:
    failed = [name for name, ok in window_conditions(n, alpha, gamma).items() if not ok]
    if failed:
        raise DomainError(f"gamma={gamma} is outside the window for n={n}, alpha={alpha}: {failed}")


def odi_exponents(n: int, alpha: float, gamma: float) -> Tuple[float, float]:
    """Показатель при s_0 в главном члене ОДН и показатель lambda остаточного члена."""
    _require_n(n)
    if alpha >= 0.5:
        raise DomainError("alpha must be below 1/2")
    _require_in_window(n, alpha, gamma)

    a1 = -3.0 + 6.0 * alpha - 2.0 * alpha / n + (1.0 - 2.0 * alpha) * gamma
    lam = (3.0 - 4.0 / n - 6.0 * alpha + 6.0 * alpha / n - (1.0 - 2.0 * alpha) * gamma) / (1.0 - 2.0 * alpha)
    return a1, lam


def lemma6_k(n: int, alpha: float, gamma: float, kappa_lower: float) -> float:
    _require_n(n, least=1)
    if alpha >= 1.0:
        raise DomainError("alpha must be below 1")
    threshold = (2.0 - 2.0 / n) * alpha
    if not gamma > threshold:
        raise DomainError(f"gamma must exceed (2-2/n)alpha = {threshold}")
    if kappa_lower <= 0:
        raise DomainError("kappa_lower must be positive")
    return n * kappa_lower / (2.0 - 2.0 * alpha) * min(gamma - threshold, 1.0)


def concentration_gap(n: int, alpha: float, gamma: float) -> float:
    """lambda - (1 + 2alpha - 2alpha/n - gamma); совпадает с Q(n, alpha)/(1-2alpha)."""
    _require_n(n)
    if alpha >= 0.5:
        raise DomainError("alpha must be below 1/2")
    lam = (3.0 - 4.0 / n - 6.0 * alpha + 6.0 * alpha / n - (1.0 - 2.0 * alpha) * gamma) / (1.0 - 2.0 * alpha)
    return lam - (1.0 + 2.0 * alpha - 2.0 * alpha / n - gamma)


def lemma17_c3(n: int, R: float, mu: float, gamma: float) -> float:
    if not (0.0 < gamma < 1.0):
        raise DomainError("gamma must lie in (0, 1)")
    return mu * R ** n / (16.0 * n) * (0.75 ** (1.0 - gamma) - 0.5 ** (1.0 - gamma)) / (1.0 - gamma)
