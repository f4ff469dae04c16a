# models/limiter.py
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from errors import DomainError
from models.params import LimiterForm, LimiterSpec

ArrayLike = Union[float, np.ndarray]


@lru_cache(maxsize=32)
def _custom_limiter(spec: LimiterSpec) -> Callable[[np.ndarray], np.ndarray]:
    xi = np.asarray(spec.xi_table, dtype=np.float64)
    spline = CubicHermiteSpline(xi, np.asarray(spec.f_table), np.asarray(spec.fprime_table))
    xi_max = xi[-1]
    f_max = float(spec.f_table[-1])
    alpha = spec.alpha

    def f(values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        inside = values <= xi_max
        # хвост за таблицей: f(xi_max) * ((1+xi)/(1+xi_max))^(-alpha)
        tail = f_max * np.power((1.0 + values) / (1.0 + xi_max), -alpha)
        return np.where(inside, spline(np.minimum(values, xi_max)), tail)

    return f


def make_limiter(spec: LimiterSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Векторизованная f без проверок аргумента (для внутреннего цикла решателя)."""
    if spec.form == LimiterForm.PROTOTYPE:
        alpha = spec.alpha

        def prototype(values: np.ndarray) -> np.ndarray:
            return np.power(1.0 + np.asarray(values, dtype=np.float64), -alpha)

        return prototype
    return _custom_limiter(spec)


def eval_f(xi: ArrayLike, spec: LimiterSpec) -> ArrayLike:
    values = np.asarray(xi, dtype=np.float64)
    if np.any(values < 0) or np.any(np.isnan(values)):
        raise DomainError("f(xi) is defined for xi >= 0 only")

    result = make_limiter(spec)(values)
    if np.ndim(xi) == 0:
        return float(result)
    return result
