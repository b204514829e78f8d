import pytest

from bellfit.lhv import LhvParams
from bellfit.model import realistic_config
from bellfit.simulate import SimulationPlan, angle_grid, simulate_grid, simulate_lhv_grid

GRID = angle_grid(0, 180, 5)
LHV_V, LHV_ETA = 0.976, 0.225
LHV_PAIRS = 10 ** 8


@pytest.fixture(scope="session")
def realistic():
    return realistic_config()


@pytest.fixture(scope="session")
def quantum_ds(realistic):
    plan = SimulationPlan(realistic, GRID, GRID, 10 ** 6, seed=1, method="staged")
    return simulate_grid(plan)


@pytest.fixture(scope="session")
def lhv_params():
    return LhvParams.from_visibility(LHV_V, LHV_ETA)


@pytest.fixture(scope="session")
def lhv_ds(realistic, lhv_params):
    plan = SimulationPlan(realistic, GRID, GRID, LHV_PAIRS, seed=0)
    return simulate_lhv_grid(plan, lhv_params)
