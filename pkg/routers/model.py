# routers/model.py
from fastapi import APIRouter, Depends, Query

from dependencies import translate_domain_errors
from models import (
    LimiterSpec,
    concentration_gap,
    critical_alpha,
    eval_f,
    gamma_window,
    lemma6_k,
    odi_exponents,
    quadratic_Q,
)
from schemas import CriticalResponse, GammaWindowResponse, LimiterResponse, OdiResponse

router = APIRouter(
    prefix="/api/v1/model",
    tags=["model"],
    dependencies=[Depends(translate_domain_errors)],
)


# --- Критический показатель ---
@router.get("/critical", response_model=CriticalResponse)
async def get_critical_alpha(
    n: int = Query(..., ge=2, description="Размерность пространства")
) -> CriticalResponse:
    return CriticalResponse(n=n, critical_alpha=critical_alpha(n))


# --- Окно для gamma и показатели ОДН в его середине ---
@router.get("/gamma", response_model=GammaWindowResponse)
async def get_gamma_window(
    n: int = Query(..., ge=2),
    alpha: float = Query(...),
    kappa: float = Query(1.0, gt=0, description="Нижняя константа ограничителя")
) -> GammaWindowResponse:
    window = gamma_window(n, alpha)
    odi = None
    if not window.empty:
        gamma = window.midpoint
        a1, lam = odi_exponents(n, alpha, gamma)
        odi = OdiResponse(
            gamma=gamma,
            a1=a1,
            lam=lam,
            k=lemma6_k(n, alpha, gamma, kappa),
            concentration_gap=concentration_gap(n, alpha, gamma),
        )

    return GammaWindowResponse(
        n=n,
        alpha=alpha,
        critical_alpha=critical_alpha(n),
        lower=window.lower,
        upper=window.upper,
        empty=window.empty,
        quadratic_Q=quadratic_Q(n, alpha),
        odi=odi,
    )


# --- Значение прототипного ограничителя ---
@router.get("/limiter", response_model=LimiterResponse)
async def get_limiter_value(
    xi: float = Query(..., ge=0),
    alpha: float = Query(...)
) -> LimiterResponse:
    return LimiterResponse(xi=xi, alpha=alpha, f=eval_f(xi, LimiterSpec(alpha=alpha)))
