import pytest

from models import Params
from schemas import InitialProfile, ProfileKind, SolverControls
from tests.helpers import make_params
from transform import MassGrid


@pytest.fixture
def params3() -> Params:
    return make_params(n=3, alpha=0.2)


@pytest.fixture
def grid3() -> MassGrid:
    return MassGrid.graded(128, 3)


@pytest.fixture
def uniform_profile() -> InitialProfile:
    return InitialProfile(kind=ProfileKind.UNIFORM)


@pytest.fixture
def indicator_profile() -> InitialProfile:
    return InitialProfile(kind=ProfileKind.INDICATOR, R0=0.3)


@pytest.fixture
def short_controls() -> SolverControls:
    return SolverControls(t_end=0.05)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    monkeypatch.setenv("KSFLUX_OUTPUT_ROOT", str(root))
    return root
