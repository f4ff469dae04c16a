# schemas.py
import enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models import Params


# --- Управление интегрированием ---
class AdvectionScheme(str, enum.Enum):
    UPWIND = "upwind"
    # центральные разности при сеточном числе Пекле <= 2, иначе против потока
    HYBRID = "hybrid"


class SolverControls(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_end: float = Field(
        ...,
        gt=0,
        description="Горизонт интегрирования"
    )
    cfl_safety: float = Field(
        0.5,
        gt=0,
        le=1,
        description="Коэффициент запаса CFL"
    )
    dt_min: Optional[float] = Field(
        None,
        gt=0,
        description="Минимальный шаг; по умолчанию порог разрешения сетки"
    )
    dt_max: float = Field(
        1e-2,
        gt=0,
        description="Максимальный шаг"
    )
    blowup_factor: float = Field(
        100.0,
        gt=1,
        description="Во сколько раз sup u должен превысить начальный уровень"
    )
    max_steps: int = Field(
        2_000_000,
        gt=0,
        description="Предельное число шагов"
    )
    theta: float = Field(
        1.0,
        ge=0,
        le=1,
        description="Вес неявности для диффузии"
    )
    snapshot_every: Optional[float] = Field(
        None,
        gt=0,
        description="Период записи снимков по времени (по умолчанию t_end/100)"
    )
    snapshot_growth: float = Field(
        1.25,
        gt=1,
        description="Рост sup u, после которого пишется дополнительный снимок"
    )
    growth_per_step: float = Field(
        1.1,
        gt=1,
        description="Допустимый рост sup u за один шаг; ограничивает шаг при приближении к взрыву"
    )
    advection: AdvectionScheme = Field(
        AdvectionScheme.HYBRID,
        description="Аппроксимация переноса в обоих решателях"
    )


# --- Параметры момента phi ---
class MomentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(
        ...,
        gt=0,
        lt=1,
        description="Показатель веса s^(-gamma)"
    )
    s0: float = Field(
        ...,
        gt=0,
        description="Правый конец интегрирования, 0 < s0 < R^n"
    )


# --- Начальные данные ---
class ProfileKind(str, enum.Enum):
    UNIFORM = "uniform"
    SMOOTH_BUMP = "smooth_bump"
    INDICATOR = "indicator"
    TABULATED = "tabulated"


class InitialProfile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ProfileKind = Field(
        ...,
        description="Класс начальных данных"
    )
    R0: Optional[float] = Field(
        None,
        gt=0,
        description="Радиус концентрации"
    )
    sharpness: Optional[float] = Field(
        None,
        ge=0,
        description="Крутизна гладкого горба exp(-sharpness (r/R0)^2)"
    )
    mu: Optional[float] = Field(
        None,
        gt=0,
        description="Целевое среднее; по умолчанию mu из Params"
    )
    r_table: Optional[Tuple[float, ...]] = Field(
        None,
        description="Узлы r для табличного профиля"
    )
    u_table: Optional[Tuple[float, ...]] = Field(
        None,
        description="Значения u для табличного профиля"
    )

    @model_validator(mode="after")
    def check_kind_fields(self) -> "InitialProfile":
        if self.kind in (ProfileKind.SMOOTH_BUMP, ProfileKind.INDICATOR) and self.R0 is None:
            raise ValueError(f"{self.kind.value} profile requires R0")
        if self.kind == ProfileKind.SMOOTH_BUMP and self.sharpness is None:
            raise ValueError("smooth_bump profile requires sharpness")
        if self.kind == ProfileKind.TABULATED:
            if self.r_table is None or self.u_table is None:
                raise ValueError("tabulated profile requires r_table and u_table")
            if len(self.r_table) != len(self.u_table) or len(self.r_table) < 2:
                raise ValueError("r_table and u_table must have equal length >= 2")
        return self


# --- Конфигурация одиночного прогона ---
class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(
        "run",
        min_length=1,
        max_length=100,
        description="Имя прогона (каталог результатов)"
    )
    params: Params
    profile: InitialProfile
    N: int = Field(
        1024,
        ge=32,
        description="Число ячеек сетки по s"
    )
    grading: float = Field(
        2.0,
        ge=1,
        description="Показатель сгущения сетки p"
    )
    controls: SolverControls
    moment: Optional[MomentConfig] = Field(
        None,
        description="gamma и s0 для phi/psi; по умолчанию середина окна и s0 из R0"
    )
    write_snapshots: bool = Field(
        True,
        description="Писать ли снимки профиля"
    )


# --- Развёртка по alpha ---
class AlphaBisection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lo: float
    hi: float
    tol: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def check_order(self) -> "AlphaBisection":
        if not self.lo < self.hi:
            raise ValueError("bisection requires lo < hi")
        return self


class ConcentrationSearch(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    radii: List[float] = Field(
        ...,
        min_length=1,
        description="Радиусы R0, перебираемые по убыванию, пока не обнаружен взрыв"
    )

    @model_validator(mode="after")
    def check_radii(self) -> "ConcentrationSearch":
        if any(not r > 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if len(set(self.radii)) != len(self.radii):
            raise ValueError("radii must be distinct")
        return self

    @property
    def ordered(self) -> List[float]:
        return sorted(self.radii, reverse=True)


class HorizonPolicy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    bounded_tail_fraction: float = Field(
        0.2,
        gt=0,
        lt=1,
        description="Доля горизонта, на которой sup u не должен расти"
    )
    bounded_refinement_rtol: float = Field(
        0.01,
        gt=0,
        description="Допустимое изменение sup u на горизонте при сгущении"
    )
    blowup_refinement_rtol: float = Field(
        0.05,
        gt=0,
        description="Допустимое изменение t_est при сгущении"
    )


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field("sweep", min_length=1, max_length=100)
    n: int = Field(..., ge=1)
    R: float = Field(1.0, gt=0)
    mu: float = Field(1.0, gt=0)
    alphas: Optional[List[float]] = Field(
        None,
        description="Явный список alpha"
    )
    bisection: Optional[AlphaBisection] = Field(
        None,
        description="Бисекция для эмпирического критического alpha"
    )
    profile: InitialProfile
    grid_sizes: List[int] = Field(
        ...,
        min_length=2,
        description="Сетки для исследования сходимости (не меньше двух)"
    )
    grading: float = Field(2.0, ge=1)
    controls: SolverControls
    horizon: HorizonPolicy = Field(default_factory=HorizonPolicy)
    concentration: Optional[ConcentrationSearch] = Field(
        None,
        description="Поиск радиуса концентрации R0: сужение начальных данных до взрыва"
    )
    workers: int = Field(1, ge=1)
    output_dir: Optional[str] = Field(
        None,
        description="Каталог результатов; по умолчанию KSFLUX_OUTPUT_ROOT"
    )

    @model_validator(mode="after")
    def check_mode(self) -> "SweepConfig":
        if (self.alphas is None) == (self.bisection is None):
            raise ValueError("exactly one of alphas or bisection must be given")
        if self.alphas is not None and not self.alphas:
            raise ValueError("alphas must not be empty")
        if any(N < 32 for N in self.grid_sizes):
            raise ValueError("grid sizes must be >= 32")
        if self.bisection is not None and self.n < 2:
            raise ValueError("bisection needs n >= 2: for n = 1 every alpha is bounded")
        if self.concentration is not None:
            if self.profile.R0 is None:
                raise ValueError("concentration search needs a profile with R0")
            if max(self.concentration.radii) >= self.R:
                raise ValueError("search radii must be smaller than R")
        return self


# --- Схемы ответов HTTP ---
class CriticalResponse(BaseModel):
    n: int
    critical_alpha: float


class LimiterResponse(BaseModel):
    xi: float
    alpha: float
    f: float


class OdiResponse(BaseModel):
    gamma: float
    a1: float
    lam: float
    k: float
    concentration_gap: float


class GammaWindowResponse(BaseModel):
    n: int
    alpha: float
    critical_alpha: float
    lower: float
    upper: float
    empty: bool
    quadratic_Q: float
    odi: Optional[OdiResponse] = Field(
        None,
        description="Показатели ОДН в середине окна"
    )


class RunSummary(BaseModel):
    name: str
    status: str
    t_final: float
    t_est: Optional[float] = None
    sup_u_max: float
    steps: int
    reason: Optional[str] = None
    resolution_limited: bool = False
    gamma_window: Optional[Tuple[float, float]] = None
    phi0: Optional[float] = None
