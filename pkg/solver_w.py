# solver_w.py
# Интегрирование вырожденной скалярной задачи для накопленной массы
#   w_t = n^2 s^(2-2/n) w_ss + n z w_s f(s^(2/n-2) z^2),  z = w - (mu/n) s,
# с фиксацией взрыва. Решатель работает с z: граничные значения z = 0 точны.
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import linalg
from scipy.special import gamma as gamma_fn

from errors import DomainError, StepFailureError
from models import Params, make_limiter
from schemas import AdvectionScheme, SolverControls
from transform import MassGrid, WState, density_from_w, shifted, validate_wstate

logger = logging.getLogger(__name__)

# dt < DT_COLLAPSE_FACTOR * dt_min считается схлопыванием шага
DT_COLLAPSE_FACTOR = 10.0
# sup u выше этой доли от n w(R^n) / h_1: масса сжата в одну-две первые ячейки
SATURATION_FRACTION = 0.25
# центральные разности допустимы при сеточном числе Пекле не больше 2
PECLET_LIMIT = 2.0


class RunStatus(str, enum.Enum):
    COMPLETED_HORIZON = "completed_horizon"
    BLOWUP_DETECTED = "blowup_detected"
    STEP_FAILURE = "step_failure"


@dataclass(frozen=True, eq=False)
class Series:
    t: np.ndarray
    sup_u: np.ndarray
    mass: np.ndarray
    min_z: np.ndarray
    dt: np.ndarray

    def as_columns(self) -> Dict[str, np.ndarray]:
        return {
            "t": self.t,
            "sup_u": self.sup_u,
            "mass": self.mass,
            "min_z": self.min_z,
            "dt": self.dt,
        }


@dataclass(frozen=True, eq=False)
class RunOutcome:
    status: RunStatus
    snapshots: List[WState]
    series: Series
    steps: int
    t_est: Optional[float] = None
    sup_u_final: Optional[float] = None
    failure_t: Optional[float] = None
    reason: Optional[str] = None
    resolution_limited: bool = False

    @property
    def t_final(self) -> float:
        return float(self.series.t[-1])


def ball_mass_factor(n: int) -> float:
    """|S^(n-1)| = n omega_n: переводит w(R^n) в полную массу."""
    return n * math.pi ** (n / 2.0) / float(gamma_fn(n / 2.0 + 1.0))


def crossing_time(t0: float, t1: float, sup0: float, sup1: float, threshold: float) -> float:
    """Момент пересечения порога, линейная интерполяция log sup u между шагами."""
    if sup1 <= sup0 or sup0 <= 0:
        return t1
    fraction = math.log(threshold / sup0) / math.log(sup1 / sup0)
    return t0 + min(max(fraction, 0.0), 1.0) * (t1 - t0)


class MassSolver:
    """IMEX-схема: диффузия theta-неявно, перенос явно."""

    def __init__(self, params: Params, grid: MassGrid, controls: SolverControls):
        if grid.n != params.n or grid.R != params.R:
            raise DomainError("grid and params disagree on n or R")
        self.params = params
        self.grid = grid
        self.controls = controls
        self.n = params.n
        self.mu = params.mu
        self.f = make_limiter(params.limiter)

        s = grid.s_nodes
        h = grid.h
        self.s = s
        self.h_minus = h[:-1]
        self.h_plus = h[1:]
        s_int = s[1:-1]
        self.D = self.n ** 2 * np.power(s_int, 2.0 - 2.0 / self.n)
        self.c_lower = 2.0 / (self.h_minus * (self.h_minus + self.h_plus))
        self.c_upper = 2.0 / (self.h_plus * (self.h_minus + self.h_plus))
        self.xi_factor = np.power(s_int, 2.0 / self.n - 2.0)

        self.dt_floor = self._resolution_floor()
        self.dt_min = controls.dt_min if controls.dt_min is not None else self.dt_floor

    def _resolution_floor(self) -> float:
        """Наименьший шаг, который adaptive_dt может дать при |z| <= mu R^n / n."""
        controls = self.controls
        total = self.params.total_w
        zs = total * np.logspace(-8.0, 0.0, 128)
        xi = self.xi_factor[:, None] * zs[None, :] ** 2
        peak = np.max(zs[None, :] * self.f(xi), axis=1)
        h = np.minimum(self.h_minus, self.h_plus)
        smallest = controls.cfl_safety * float(np.min(h / (self.n * peak)))
        if controls.theta < 1.0:
            diffusive = np.min(1.0 / ((1.0 - controls.theta) * self.D * (self.c_lower + self.c_upper)))
            smallest = min(smallest, controls.cfl_safety * float(diffusive))
        return 0.9 * min(smallest, controls.dt_max)

    @property
    def grid_limit(self) -> float:
        """Наибольшая плотность, которую сетка может представить: вся масса в первой ячейке."""
        return self.n * self.params.total_w / float(self.grid.h[0])

    # --- пространственные операторы ---
    def _speed(self, z: np.ndarray):
        zi = z[1:-1]
        fi = self.f(self.xi_factor * zi * zi)
        upwind_h = np.where(zi >= 0, self.h_plus, self.h_minus)
        return zi, fi, self.n * np.abs(zi) * fi, upwind_h

    def _transport(self, z: np.ndarray):
        zi, fi, speed, upwind_h = self._speed(z)
        forward = (z[2:] - zi) / self.h_plus
        backward = (zi - z[:-2]) / self.h_minus
        # скорость -n z f: при z >= 0 характеристика уходит к s = 0, берём разность вперёд
        slope = np.where(zi >= 0, forward, backward)
        if self.controls.advection == AdvectionScheme.HYBRID:
            central = (self.h_plus * backward + self.h_minus * forward) / (self.h_minus + self.h_plus)
            peclet = speed * upwind_h / self.D
            slope = np.where(peclet <= PECLET_LIMIT, central, slope)
        w_s = slope + self.mu / self.n
        return self.n * zi * fi * w_s, speed

    def _diffusion(self, z: np.ndarray) -> np.ndarray:
        return self.D * (self.c_lower * z[:-2] - (self.c_lower + self.c_upper) * z[1:-1] + self.c_upper * z[2:])

    def advective_limit(self, z: np.ndarray) -> float:
        _, _, speed, upwind_h = self._speed(z)
        moving = speed > 0
        if not np.any(moving):
            return math.inf
        return self.controls.cfl_safety * float(np.min(upwind_h[moving] / speed[moving]))

    def adaptive_dt(self, z: np.ndarray) -> float:
        theta = self.controls.theta
        dt = self.advective_limit(z)
        if theta < 1.0:
            diffusive = float(np.min(1.0 / ((1.0 - theta) * self.D * (self.c_lower + self.c_upper))))
            dt = min(dt, self.controls.cfl_safety * diffusive)
        return min(dt, self.controls.dt_max)

    def step(self, z: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
        if dt == 0:
            return z.copy()
        theta = self.controls.theta
        transport, _ = self._transport(z)
        rhs = z[1:-1] + dt * transport
        if theta < 1.0:
            rhs = rhs + (1.0 - theta) * dt * self._diffusion(z)

        z_new = np.zeros_like(z)
        if theta > 0.0:
            scale = theta * dt * self.D
            m = rhs.size
            ab = np.zeros((3, m))
            ab[0, 1:] = -scale[:-1] * self.c_upper[:-1]
            ab[1, :] = 1.0 + scale * (self.c_lower + self.c_upper)
            ab[2, :-1] = -scale[1:] * self.c_lower[1:]
            try:
                z_new[1:-1] = linalg.solve_banded((1, 1), ab, rhs)
            except (linalg.LinAlgError, ValueError) as e:
                raise StepFailureError(f"tridiagonal solve failed: {e}", t) from e
        else:
            z_new[1:-1] = rhs

        if not np.all(np.isfinite(z_new)):
            raise StepFailureError("non-finite values after step", t)
        return z_new

    def to_state(self, z: np.ndarray, t: float) -> WState:
        return WState(w=z + self.mu * self.s / self.n, t=t)

    def sup_u(self, z: np.ndarray) -> float:
        return float(np.max(density_from_w(self.to_state(z, 0.0), self.grid, self.params)))

    def mass(self, z: np.ndarray) -> float:
        """|S^(n-1)| w(R^n, t) по текущему состоянию."""
        return ball_mass_factor(self.n) * float(self.to_state(z, 0.0).w[-1])

    def at_resolution_limit(self, z: np.ndarray) -> bool:
        """Профиль сжат до масштаба первых ячеек сетки."""
        return self.sup_u(z) >= SATURATION_FRACTION * self.grid_limit

    def _growth_cap(self, sup_before: float, sup_after: float, dt: float) -> float:
        if sup_after <= sup_before or dt <= 0:
            return math.inf
        rate = math.log(sup_after / sup_before) / dt
        return math.log(self.controls.growth_per_step) / rate

    def integrate(self, w0: WState) -> RunOutcome:
        validate_wstate(w0, self.grid, self.params)
        controls = self.controls
        z = shifted(w0, self.grid, self.params).z
        t = float(w0.t)
        t_end = t + controls.t_end

        sup_u = self.sup_u(z)
        threshold = controls.blowup_factor * max(sup_u, self.mu)
        cadence = controls.snapshot_every or controls.t_end / 100.0

        rec = _Recorder()
        rec.add(t, sup_u, self.mass(z), float(np.min(z)), 0.0)
        snapshots = [self.to_state(z, t)]
        next_snapshot = t + cadence
        last_snapshot_sup = sup_u
        t_cross: Optional[float] = None
        dt_growth = math.inf
        steps = 0

        logger.info(
            "integrate: n=%d alpha=%g N=%d t_end=%g threshold=%.4g dt_min=%.3g",
            self.n, self.params.alpha, self.grid.N, t_end, threshold, self.dt_min,
        )

        def finish(status: RunStatus, **extra) -> RunOutcome:
            if snapshots[-1].t != t:
                snapshots.append(self.to_state(z, t))
            if status == RunStatus.COMPLETED_HORIZON and self.at_resolution_limit(z):
                extra.update(resolution_limited=True, reason="solution saturated at grid resolution")
                logger.warning("integrate: profile at the grid resolution limit at t=%.6g", t)
            outcome = RunOutcome(status=status, snapshots=snapshots, series=rec.build(), steps=steps, **extra)
            logger.info("integrate finished: %s at t=%.6g after %d steps", status.value, t, steps)
            return outcome

        while t < t_end:
            if steps >= controls.max_steps:
                return finish(RunStatus.STEP_FAILURE, failure_t=t, reason="max_steps exhausted")

            dt_cfl = self.adaptive_dt(z)
            if t_cross is not None and sup_u >= threshold and dt_cfl < DT_COLLAPSE_FACTOR * self.dt_min:
                return finish(RunStatus.BLOWUP_DETECTED, t_est=t_cross, sup_u_final=sup_u)
            if dt_cfl < self.dt_min:
                return finish(RunStatus.STEP_FAILURE, failure_t=t, reason="time step collapsed below dt_min")

            # ограничение по росту sup u не опускает шаг ниже dt_min
            dt = min(dt_cfl, max(dt_growth, self.dt_min))
            last = dt >= t_end - t
            if last:
                dt = t_end - t
            try:
                z = self.step(z, dt, t)
            except StepFailureError as e:
                return finish(RunStatus.STEP_FAILURE, failure_t=t, reason=e.reason)
            t_prev, sup_prev = t, sup_u
            t = t_end if last else t + dt
            steps += 1

            sup_u = self.sup_u(z)
            dt_growth = self._growth_cap(sup_prev, sup_u, t - t_prev)
            if t_cross is None and sup_u >= threshold:
                t_cross = crossing_time(t_prev, t, sup_prev, sup_u, threshold)
            rec.add(t, sup_u, self.mass(z), float(np.min(z)), dt)

            if t >= next_snapshot or sup_u >= controls.snapshot_growth * last_snapshot_sup:
                snapshots.append(self.to_state(z, t))
                last_snapshot_sup = sup_u
                while next_snapshot <= t:
                    next_snapshot += cadence
                logger.debug("snapshot t=%.6g sup_u=%.6g dt=%.3g", t, sup_u, dt)

        return finish(RunStatus.COMPLETED_HORIZON)


@dataclass
class _Recorder:
    rows: List[tuple] = field(default_factory=list)

    def add(self, t: float, sup_u: float, mass: float, min_z: float, dt: float) -> None:
        self.rows.append((t, sup_u, mass, min_z, dt))

    def build(self) -> Series:
        data = np.array(self.rows, dtype=np.float64).reshape(-1, 5)
        return Series(t=data[:, 0], sup_u=data[:, 1], mass=data[:, 2], min_z=data[:, 3], dt=data[:, 4])


def step(state: WState, params: Params, grid: MassGrid, controls: SolverControls,
         dt: Optional[float] = None) -> WState:
    solver = MassSolver(params, grid, controls)
    z = shifted(state, grid, params).z
    if dt is None:
        dt = solver.adaptive_dt(z)
    return solver.to_state(solver.step(z, dt, state.t), state.t + dt)


def adaptive_dt(state: WState, params: Params, grid: MassGrid, controls: SolverControls) -> float:
    solver = MassSolver(params, grid, controls)
    return solver.adaptive_dt(shifted(state, grid, params).z)


def integrate(w0: WState, params: Params, grid: MassGrid, controls: SolverControls) -> RunOutcome:
    return MassSolver(params, grid, controls).integrate(w0)
