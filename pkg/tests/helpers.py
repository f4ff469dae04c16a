import numpy as np

from models import LimiterSpec, Params
from transform import MassGrid, WState


def make_params(n: int = 3, alpha: float = 0.2, R: float = 1.0, mu: float = 1.0) -> Params:
    return Params(n=n, R=R, mu=mu, limiter=LimiterSpec(alpha=alpha))


def state_from_z(z: np.ndarray, grid: MassGrid, params: Params, t: float = 0.0) -> WState:
    return WState(w=z + params.mu * grid.s_nodes / params.n, t=t)


def bump_z(grid: MassGrid, params: Params, eps: float = 0.05) -> np.ndarray:
    """eps s (R^n - s) / R^n: неотрицательное z с нулями на концах."""
    s = grid.s_nodes
    total = params.volume_s
    return eps * s * (total - s) / total

