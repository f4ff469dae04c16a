# solver_primal.py
# Независимый радиальный решатель исходной системы в переменной r:
#   u_t = r^(1-n) (r^(n-1) (u_r - u f(v_r^2) v_r))_r,  0 = Delta v - mu + u,
# консервативные конечные объёмы, явный шаг, гибридный перенос.
# Используется как оракул для solver_w.
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from errors import DomainError, StepFailureError
from initdata import make_profile
from models import Params, make_limiter
from schemas import AdvectionScheme, InitialProfile, SolverControls
from solver_w import PECLET_LIMIT, MassSolver, RunStatus
from transform import MassGrid, accumulate, cumulative_moment, density_from_w

logger = logging.getLogger(__name__)

MEAN_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class RadialState:
    u: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class PrimalOutcome:
    status: RunStatus
    state: RadialState
    steps: int
    reason: Optional[str] = None


class FiniteVolumes:
    """Контрольные объёмы вокруг узлов r_j; грани в серединах, r = 0 и r = R без потока."""

    def __init__(self, grid: MassGrid):
        r = grid.r_nodes
        n = grid.n
        self.n = n
        self.r = r
        faces = np.concatenate(([0.0], 0.5 * (r[:-1] + r[1:]), [grid.R]))
        self.volumes = np.diff(np.power(faces, n)) / n
        inner = faces[1:-1]
        self.face_area = np.power(inner, n - 1)
        self.dr = np.diff(r)

    def mean(self, u: np.ndarray) -> float:
        return float(np.dot(self.volumes, u) / np.sum(self.volumes))


def elliptic_solve(state: RadialState, params: Params, grid: MassGrid) -> np.ndarray:
    """v_r(r) = r^(1-n) int_0^r rho^(n-1) (mu - u) drho в узлах; v_r(0) = v_r(R) = 0."""
    u = np.asarray(state.u, dtype=np.float64)
    if np.any(u < 0):
        raise DomainError("density must be nonnegative")
    deficit = cumulative_moment(params.mu - u, grid)
    v_r = np.zeros_like(u)
    r = grid.r_nodes[1:-1]
    v_r[1:-1] = np.power(r, 1.0 - params.n) * deficit[1:-1]
    return v_r


class PrimalSolver:
    def __init__(self, params: Params, grid: MassGrid, controls: SolverControls):
        if grid.n != params.n or grid.R != params.R:
            raise DomainError("grid and params disagree on n or R")
        self.params = params
        self.grid = grid
        self.controls = controls
        self.fv = FiniteVolumes(grid)
        self.f = make_limiter(params.limiter)

    def _velocity(self, state: RadialState) -> np.ndarray:
        v_r = elliptic_solve(state, self.params, self.grid)
        v_face = 0.5 * (v_r[:-1] + v_r[1:])
        return self.f(v_face * v_face) * v_face

    def fluxes(self, u: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        """Потоки через внутренние грани: r^(n-1) (-u_r + u f v_r).

        Значение u на грани берётся против потока; в гибридной схеме при сеточном
        числе Пекле |f v_r| dr <= 2 оно заменяется средним по соседним узлам.
        """
        u_face = np.where(velocity > 0, u[:-1], u[1:])
        if self.controls.advection == AdvectionScheme.HYBRID:
            central = np.abs(velocity) * self.fv.dr <= PECLET_LIMIT
            u_face = np.where(central, 0.5 * (u[:-1] + u[1:]), u_face)
        return self.fv.face_area * (-(u[1:] - u[:-1]) / self.fv.dr + u_face * velocity)

    def stable_dt(self, velocity: np.ndarray) -> float:
        fv = self.fv
        out_right = fv.face_area * (1.0 / fv.dr + np.maximum(velocity, 0.0))
        out_left = fv.face_area * (1.0 / fv.dr + np.maximum(-velocity, 0.0))
        rate = np.zeros_like(fv.volumes)
        rate[:-1] += out_right
        rate[1:] += out_left
        rate /= fv.volumes
        return min(self.controls.cfl_safety / float(np.max(rate)), self.controls.dt_max)

    def step(self, state: RadialState, dt: Optional[float] = None) -> RadialState:
        velocity = self._velocity(state)
        if dt is None:
            dt = self.stable_dt(velocity)
        flux = self.fluxes(state.u, velocity)
        divergence = np.zeros_like(state.u)
        divergence[:-1] += flux
        divergence[1:] -= flux
        u_new = state.u - dt * divergence / self.fv.volumes
        if not np.all(np.isfinite(u_new)):
            raise StepFailureError("non-finite values in primal step", state.t)
        return RadialState(u=np.maximum(u_new, 0.0), t=state.t + dt)

    def integrate(self, state: RadialState, t_end: float) -> PrimalOutcome:
        steps = 0
        while state.t < t_end:
            if steps >= self.controls.max_steps:
                return PrimalOutcome(RunStatus.STEP_FAILURE, state, steps, "max_steps exhausted")
            dt = self.stable_dt(self._velocity(state))
            last = dt >= t_end - state.t
            try:
                state = self.step(state, t_end - state.t if last else dt)
            except StepFailureError as e:
                return PrimalOutcome(RunStatus.STEP_FAILURE, state, steps, e.reason)
            if last:
                state = RadialState(u=state.u, t=t_end)
            steps += 1
        return PrimalOutcome(RunStatus.COMPLETED_HORIZON, state, steps)


def validate_radial(state: RadialState, params: Params, grid: MassGrid) -> None:
    u = state.u
    if u.shape != grid.r_nodes.shape or not np.all(np.isfinite(u)):
        raise DomainError("density must be finite and sampled on the r-nodes")
    if np.any(u < 0):
        raise DomainError("density must be nonnegative")
    mean = FiniteVolumes(grid).mean(u)
    if abs(mean - params.mu) > MEAN_RTOL * params.mu:
        raise DomainError(f"mean {mean} differs from mu={params.mu}")


def primal_state(u0: np.ndarray, params: Params, grid: MassGrid) -> RadialState:
    """Перенормирует u0 на среднее mu в объёмах конечных элементов."""
    mean = FiniteVolumes(grid).mean(u0)
    if not mean > 0:
        raise DomainError("initial density has no mass")
    return RadialState(u=np.asarray(u0, dtype=np.float64) * (params.mu / mean), t=0.0)


def advance_primal(state: RadialState, params: Params, grid: MassGrid, controls: SolverControls,
                   dt: Optional[float] = None) -> RadialState:
    validate_radial(state, params, grid)
    return PrimalSolver(params, grid, controls).step(state, dt)


@dataclass(frozen=True)
class CrosscheckLevel:
    N: int
    discrepancy: float


@dataclass(frozen=True, eq=False)
class CrosscheckReport:
    t_check: float
    levels: List[CrosscheckLevel]
    primal: List[RadialState]
    grids: List[MassGrid]

    @property
    def ratios(self) -> List[float]:
        d = [level.discrepancy for level in self.levels]
        return [a / b if b > 0 else math.inf for a, b in zip(d[:-1], d[1:])]


def discrepancy(u_a: np.ndarray, u_b: np.ndarray, u0: np.ndarray) -> float:
    return float(np.max(np.abs(u_a - u_b)) / np.max(np.abs(u0)))


def crosscheck(profile: InitialProfile, params: Params, t_check: float, grid_sizes: Sequence[int],
               controls: SolverControls, grading: Optional[float] = None) -> CrosscheckReport:
    """Сравнивает решение в r с плотностью из w(s, t_check) на нескольких сетках.

    По умолчанию grading = n: образ сетки по s равномерен по r, и точность
    решателя в r не ограничена крупными ячейками у начала координат.
    """
    if t_check <= 0:
        raise DomainError("t_check must be positive")
    if grading is None:
        grading = float(params.n)
    # theta = 1/2: шаг по времени ограничен явной частью диффузии и мельчает вместе с сеткой
    w_controls = controls.model_copy(update={"t_end": t_check, "theta": 0.5})

    levels, primal, grids = [], [], []
    for N in grid_sizes:
        grid = MassGrid.graded(N, params.n, params.R, grading)
        u0 = make_profile(profile, params, grid)

        run = MassSolver(params, grid, w_controls).integrate(accumulate(u0, grid, params))
        if run.status != RunStatus.COMPLETED_HORIZON:
            raise StepFailureError(f"mass-variable run: {run.reason or run.status.value}", run.failure_t)
        u_w = density_from_w(run.snapshots[-1], grid, params)

        outcome = PrimalSolver(params, grid, w_controls).integrate(primal_state(u0, params, grid), t_check)
        if outcome.status != RunStatus.COMPLETED_HORIZON:
            raise StepFailureError(f"primal run: {outcome.reason}", outcome.state.t)

        d = discrepancy(outcome.state.u, u_w, u0)
        logger.info("crosscheck N=%d discrepancy=%.4g (primal steps %d)", N, d, outcome.steps)
        levels.append(CrosscheckLevel(N=N, discrepancy=d))
        primal.append(outcome.state)
        grids.append(grid)
    return CrosscheckReport(t_check=t_check, levels=levels, primal=primal, grids=grids)
