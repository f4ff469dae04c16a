from models.params import Params, LimiterSpec, LimiterForm
from models.limiter import eval_f, make_limiter
from models.exponents import (
    GammaWindow,
    concentration_gap,
    critical_alpha,
    gamma_window,
    lemma2_bound,
    lemma6_k,
    lemma17_c3,
    odi_exponents,
    quadratic_Q,
    window_conditions,
)
from models.rational import rational_conditions, rational_window


__all__ = [
    "Params",
    "LimiterSpec",
    "LimiterForm",
    "eval_f",
    "make_limiter",
    "GammaWindow",
    "concentration_gap",
    "critical_alpha",
    "gamma_window",
    "lemma2_bound",
    "lemma6_k",
    "lemma17_c3",
    "odi_exponents",
    "quadratic_Q",
    "window_conditions",
    "rational_conditions",
    "rational_window",
]
