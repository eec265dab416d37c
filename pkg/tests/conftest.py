import sys
from pathlib import Path

import pytest

import quantcredit as qc
from quantcredit.rng import derive_key

sys.path.insert(0, str(Path(__file__).parent))

# Benchmark scenario used throughout: lognormal firm value observed through
# a noisy price, barrier at 76, prices watched for one year on 50 steps.
BS_MU = 0.03
BS_SIGMA = 0.05
BS_DELTA = 0.1
V0 = 86.3
BARRIER = 76.0
HORIZON = 1.0
QUANT_SEED = 11
OBS_ROOT_SEED = 7
MC_SEED = derive_key(42, "survival-mc")


@pytest.fixture(scope="session")
def bs_model():
    return qc.GBM(BS_MU, BS_SIGMA)


@pytest.fixture(scope="session")
def cev_model():
    return qc.CEV(BS_MU, 744.7, -2.0)


@pytest.fixture(scope="session")
def bs_obs():
    return qc.ObservationModel(psi=BS_MU, nu=BS_SIGMA, delta=BS_DELTA)


@pytest.fixture(scope="session")
def bs_scenario():
    return qc.MarketScenario(V0, V0, BARRIER, HORIZON, (1.5, 2.0, 3.0))


@pytest.fixture(scope="session")
def grid50():
    return qc.TimeGrid.uniform(HORIZON, 50)


@pytest.fixture(scope="session")
def grid5():
    return qc.TimeGrid.uniform(HORIZON, 5)


@pytest.fixture(scope="session")
def bs_quantization(bs_model, bs_scenario, grid50):
    """Full-size grids and transitions: n=50, 60 points, 80 Lloyd passes."""
    sizes = (1,) + (60,) * 50
    seq = qc.build_grid_sequence(bs_model, bs_scenario, grid50, sizes, 100_000, 80, QUANT_SEED)
    trans = qc.estimate_transitions(seq, bs_model, bs_scenario, grid50, 100_000, QUANT_SEED)
    return seq, trans


@pytest.fixture(scope="session")
def reduced_quantization(bs_model, bs_scenario, grid5):
    """Reduced instance for oracle comparisons: n=5, 10 points per step."""
    sizes = (1,) + (10,) * 5
    seq = qc.build_grid_sequence(bs_model, bs_scenario, grid5, sizes, 100_000, 80, QUANT_SEED)
    trans = qc.estimate_transitions(seq, bs_model, bs_scenario, grid5, 100_000, QUANT_SEED)
    return seq, trans


def observation_seed(index: int) -> int:
    return derive_key(OBS_ROOT_SEED, "observation", index)


@pytest.fixture(scope="session")
def bs_path(bs_model, bs_obs, bs_scenario, grid50):
    """A joint (V, S) path on the 50-step grid, observation seed 0."""
    return qc.simulate_joint_path(bs_model, bs_obs, bs_scenario, grid50, observation_seed(0))


@pytest.fixture(scope="session")
def bs_filter(bs_quantization, bs_path, bs_model, bs_obs, grid50):
    seq, trans = bs_quantization
    return qc.run_filter(qc.ObservationPath(bs_path.s_path), seq, trans, bs_model, bs_obs, grid50)
