import pytest

from timing_game import (
    EconParams,
    MarketParams,
    SimConfig,
    build_profile,
    build_value_functions,
    compute_b_sets,
    preemption_intervals,
)

# base configuration every closed-form test runs against
REF_ALPHA = 0.10
REF_SIGMA = 0.30
REF_R = 0.20


@pytest.fixture(scope="session")
def market():
    return MarketParams(alpha=REF_ALPHA, sigma=REF_SIGMA, r=REF_R)


@pytest.fixture(scope="session")
def econ():
    return EconParams(
        pi_low=1.0, pi_high=2.0, xi=30.0, inv_cost=10.0, theta=0.8, p_high=0.5
    )


@pytest.fixture(scope="session")
def values(market, econ):
    return build_value_functions(market, econ)


@pytest.fixture(scope="session")
def intervals(values):
    return preemption_intervals(values)


@pytest.fixture(scope="session")
def bsets(values, intervals):
    return compute_b_sets(values.L, values.roots, intervals)


@pytest.fixture(scope="session")
def profile(intervals, bsets):
    return build_profile(intervals, bsets)


@pytest.fixture(scope="session")
def sim_small():
    # enough paths that a 3-standard-error band is meaningfully tight
    return SimConfig(n_paths=4000, dt=0.005, horizon=30.0, seed=11)
