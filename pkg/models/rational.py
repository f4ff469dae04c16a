# models/rational.py
# Точная арифметика на дробях для окна gamma: независимая проверка
# вычислений в плавающей точке.
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

Rational = Union[int, Fraction]


def rational_window(n: int, alpha: Rational) -> Optional[Tuple[Fraction, Fraction]]:
    """Точное окно на дробях: (lower, upper) или None."""
    n, alpha = Fraction(n), Fraction(alpha)
    slope = 1 - 2 * alpha
    bounds = (2 - 4 / n - 4 * alpha + 6 * alpha / n, 2 - 4 * alpha + 2 * alpha / n)
    lower = max(Fraction(0), (2 - 2 / n) * alpha)
    upper = Fraction(1)
    for bound in bounds:
        if slope > 0:
            upper = min(upper, bound / slope)
        elif slope < 0:
            lower = max(lower, bound / slope)
        elif bound <= 0:
            return None
    return (lower, upper) if lower < upper else None


def rational_conditions(n: int, alpha: Rational, gamma: Rational) -> Dict[str, bool]:
    """Те же четыре строгих условия, что и window_conditions, без округления."""
    n, alpha, gamma = Fraction(n), Fraction(alpha), Fraction(gamma)
    slope = 1 - 2 * alpha
    return {
        "unit_interval": 0 < gamma < 1,
        "above_lemma6_threshold": gamma > (2 - 2 / n) * alpha,
        "condition_13_1": slope * gamma < 2 - 4 / n - 4 * alpha + 6 * alpha / n,
        "condition_14_1": slope * gamma < 2 - 4 * alpha + 2 * alpha / n,
    }
