# models/params.py
import enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Решётка для проверки "сэндвича" kappa_f(1+xi)^(-alpha) <= f <= K_f(1+xi)^(-alpha)
SANDWICH_LATTICE_SIZE = 1000
SANDWICH_RTOL = 1e-12


class LimiterForm(str, enum.Enum):
    PROTOTYPE = "prototype"
    CUSTOM = "custom"


class LimiterSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(
        ...,
        description="Показатель ограничителя потока alpha"
    )
    kappa_lower: float = Field(
        1.0,
        gt=0,
        description="Нижняя константа kappa_f"
    )
    kappa_upper: float = Field(
        1.0,
        gt=0,
        description="Верхняя константа K_f"
    )
    form: LimiterForm = Field(
        LimiterForm.PROTOTYPE,
        description="prototype: f = (1+xi)^(-alpha); custom: табличная f с производной"
    )
    xi_table: Optional[Tuple[float, ...]] = Field(
        None,
        description="Узлы xi (строго возрастают, первый равен 0)"
    )
    f_table: Optional[Tuple[float, ...]] = Field(
        None,
        description="Значения f в узлах"
    )
    fprime_table: Optional[Tuple[float, ...]] = Field(
        None,
        description="Значения f' в узлах"
    )

    @model_validator(mode="after")
    def check_constants(self) -> "LimiterSpec":
        if self.kappa_lower > self.kappa_upper:
            raise ValueError("kappa_lower must not exceed kappa_upper")

        if self.form == LimiterForm.PROTOTYPE:
            if self.kappa_lower != 1.0 or self.kappa_upper != 1.0:
                raise ValueError("prototype limiter requires kappa_lower = kappa_upper = 1")
            return self

        tables = (self.xi_table, self.f_table, self.fprime_table)
        if any(t is None for t in tables):
            raise ValueError("custom limiter requires xi_table, f_table and fprime_table")
        if len({len(t) for t in tables}) != 1 or len(self.xi_table) < 2:
            raise ValueError("custom limiter tables must have equal length >= 2")

        xi = np.asarray(self.xi_table)
        if xi[0] != 0.0 or np.any(np.diff(xi) <= 0):
            raise ValueError("xi_table must start at 0 and be strictly increasing")
        if np.any(np.asarray(self.f_table) <= 0):
            raise ValueError("f_table must be positive")

        # импорт здесь: limiter.py сам импортирует LimiterSpec
        from models.limiter import make_limiter

        lattice = np.concatenate(
            ([0.0], np.logspace(-6.0, np.log10(10.0 * xi[-1] + 1.0), SANDWICH_LATTICE_SIZE - 1))
        )
        f = make_limiter(self)(lattice)
        base = np.power(1.0 + lattice, -self.alpha)
        slack = SANDWICH_RTOL * base
        if np.any(f < self.kappa_lower * base - slack) or np.any(f > self.kappa_upper * base + slack):
            raise ValueError("custom limiter violates kappa_f(1+xi)^-alpha <= f <= K_f(1+xi)^-alpha")
        return self


class Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(
        ...,
        ge=1,
        description="Размерность пространства"
    )
    R: float = Field(
        1.0,
        gt=0,
        description="Радиус шара"
    )
    mu: float = Field(
        1.0,
        gt=0,
        description="Средняя плотность mu"
    )
    limiter: LimiterSpec = Field(
        ...,
        description="Ограничитель потока f"
    )

    @property
    def alpha(self) -> float:
        return self.limiter.alpha

    @property
    def volume_s(self) -> float:
        # R^n: правый конец массовой переменной s
        return self.R ** self.n

    @property
    def total_w(self) -> float:
        # граничное значение w(R^n) = mu R^n / n
        return self.mu * self.volume_s / self.n
