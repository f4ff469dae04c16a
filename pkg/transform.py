# transform.py
# Переход между радиальной плотностью u(r), накопленной массой w(s), s = r^n,
# сдвинутой переменной z = w - (mu/n) s и градиентом v_r.
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from errors import DomainError
from models import Params

MIN_NODES = 33


@dataclass(frozen=True, eq=False)
class MassGrid:
    s_nodes: np.ndarray
    p: float
    n: int
    R: float

    def __post_init__(self):
        s = self.s_nodes
        if s.ndim != 1 or s.size < MIN_NODES:
            raise DomainError(f"mass grid needs at least {MIN_NODES} nodes")
        if s[0] != 0.0 or s[-1] != self.R ** self.n:
            raise DomainError("mass grid endpoints must be exactly 0 and R^n")
        if np.any(np.diff(s) <= 0):
            raise DomainError("mass grid must be strictly increasing")
        if self.p < 1:
            raise DomainError("grading exponent must be >= 1")

    @classmethod
    def graded(cls, N: int, n: int, R: float = 1.0, p: float = 2.0) -> "MassGrid":
        """s_j = R^n (j/N)^p; сгущение к s = 0, где вырождается диффузия."""
        if N + 1 < MIN_NODES:
            raise DomainError(f"N must be at least {MIN_NODES - 1}")
        total = R ** n
        s = total * np.power(np.arange(N + 1, dtype=np.float64) / N, p)
        s[0] = 0.0
        s[-1] = total
        s.setflags(write=False)
        return cls(s_nodes=s, p=float(p), n=int(n), R=float(R))

    @property
    def N(self) -> int:
        return self.s_nodes.size - 1

    @cached_property
    def r_nodes(self) -> np.ndarray:
        r = np.power(self.s_nodes, 1.0 / self.n)
        r[-1] = self.R
        return r

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.s_nodes)

    @cached_property
    def cell_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        # Гаусс-Лежандр точен для rho^(n-1) * (линейная функция) степени n
        x, W = np.polynomial.legendre.leggauss(self.n // 2 + 1)
        tau = 0.5 * (x + 1.0)
        r = self.r_nodes
        length = np.diff(r)[:, None]
        rho = r[:-1, None] + length * tau[None, :]
        kernel = 0.5 * W[None, :] * length * np.power(rho, self.n - 1)
        left = np.sum(kernel * (1.0 - tau[None, :]), axis=1)
        right = np.sum(kernel * tau[None, :], axis=1)
        return left, right


@dataclass(frozen=True, eq=False)
class WState:
    w: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class ZProfile:
    z: np.ndarray


def cumulative_moment(g: np.ndarray, grid: MassGrid) -> np.ndarray:
    """int_0^{r_j} rho^(n-1) g(rho) drho для кусочно-линейной g; без проверки знака."""
    left, right = grid.cell_weights
    cells = left * g[:-1] + right * g[1:]
    return np.concatenate(([0.0], np.cumsum(cells)))


def accumulate(u: np.ndarray, grid: MassGrid, params: Params) -> WState:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != grid.s_nodes.shape:
        raise DomainError("density must be sampled on the r-image of the mass grid")
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise DomainError("density must be finite and nonnegative")
    return WState(w=cumulative_moment(u, grid), t=0.0)


def first_derivative(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Трёхточечная производная на неравномерной сетке (второй порядок)."""
    h = np.diff(s)
    slopes = np.diff(values) / h
    out = np.empty_like(values, dtype=np.float64)

    h_minus, h_plus = h[:-1], h[1:]
    # выпуклая комбинация односторонних разностей
    out[1:-1] = (h_plus * slopes[:-1] + h_minus * slopes[1:]) / (h_minus + h_plus)
    out[0] = ((2.0 * h[0] + h[1]) * slopes[0] - h[0] * slopes[1]) / (h[0] + h[1])
    out[-1] = ((2.0 * h[-1] + h[-2]) * slopes[-1] - h[-1] * slopes[-2]) / (h[-1] + h[-2])
    return out


def density_from_w(state: WState, grid: MassGrid, params: Params) -> np.ndarray:
    u = params.n * first_derivative(state.w, grid.s_nodes)
    return np.maximum(u, 0.0)


def shifted(state: WState, grid: MassGrid, params: Params) -> ZProfile:
    z = state.w - params.mu * grid.s_nodes / params.n
    z[0] = 0.0
    z[-1] = 0.0
    return ZProfile(z=z)


def limiter_argument(z: np.ndarray, grid: MassGrid) -> np.ndarray:
    """xi = s^(2/n-2) z^2; в s = 0 доопределено нулём (z = O(s))."""
    n = grid.n
    xi = np.zeros_like(z, dtype=np.float64)
    s = grid.s_nodes[1:]
    xi[1:] = np.power(s, 2.0 / n - 2.0) * z[1:] ** 2
    return xi


def gradient_v(state: WState, grid: MassGrid, params: Params) -> np.ndarray:
    """v_r = -r^(1-n) z(r^n) в узлах r_1..r_N (узел r = 0 исключён)."""
    z = shifted(state, grid, params).z
    r = grid.r_nodes[1:]
    return -np.power(r, 1.0 - params.n) * z[1:]


def validate_wstate(state: WState, grid: MassGrid, params: Params, rtol: float = 1e-10) -> None:
    w = state.w
    scale = params.total_w
    if w.shape != grid.s_nodes.shape:
        raise DomainError("w must be sampled on the mass grid")
    if not np.all(np.isfinite(w)):
        raise DomainError("w contains non-finite values")
    if abs(w[0]) > rtol * scale or abs(w[-1] - scale) > rtol * scale:
        raise DomainError("w must satisfy w(0) = 0 and w(R^n) = mu R^n / n")
    if np.min(np.diff(w)) < -rtol * scale:
        raise DomainError("w must be nondecreasing in s")
    if state.t < 0:
        raise DomainError("time must be nonnegative")
