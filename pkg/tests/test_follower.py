import numpy as np
import pytest

from timing_game import (
    EconParams,
    FollowerRegime,
    char_roots,
    classify_regime,
    solve_high,
    solve_low,
)
from timing_game.follower import (
    follower_policy,
    follower_value,
    high_solution_summary,
    low_solution_summary,
)


@pytest.fixture(scope="module")
def econ_ai():
    # a small copy discount kills the inner window
    return EconParams(pi_low=1.0, pi_high=2.0, xi=30.0, inv_cost=10.0, theta=0.1)


def test_classify_regime(market, econ, econ_ai):
    assert classify_regime(market, econ) is FollowerRegime.INNER_WAIT
    assert classify_regime(market, econ_ai) is FollowerRegime.ALWAYS_INNOVATE


def test_high_threshold_closed_form(market, econ):
    sol = solve_high(market, econ)
    g = char_roots(market).gamma
    a_h = econ.pi_high / (market.r - market.alpha)
    k1 = (1.0 - econ.theta) * econ.inv_cost
    assert sol.z_h == pytest.approx(g / (g - 1.0) * k1 / a_h, rel=1e-14)
    assert sol.z_h == pytest.approx(0.2712737313256921, rel=1e-12)
    # settled branch is the copy reward itself
    assert sol.value(2.0) == pytest.approx(a_h * 2.0 - k1)


def test_low_solution_reference_values(values):
    low = values.follower_low
    assert low.regime is FollowerRegime.INNER_WAIT
    assert low.z1 == pytest.approx(0.5425474626513842, rel=1e-12)
    assert low.z2 == pytest.approx(1.3116814824136203, rel=1e-9)
    assert low.z3 == pytest.approx(1.9718392633086312, rel=1e-9)
    assert low.a0_coef == pytest.approx(9.022655717517331, rel=1e-12)
    assert low.b0_coef == pytest.approx(6.56801209882798, rel=1e-9)
    assert low.c0_coef == pytest.approx(-2.19022405855889, rel=1e-9)


def test_threshold_ordering(values):
    low, high = values.follower_low, values.follower_high
    assert high.z_h < low.z1 <= low.z2 <= low.z3
    # the copy threshold halves exactly: same reward cost, twice the slope
    assert high.z_h == pytest.approx(low.z1 / 2.0, rel=1e-14)


def test_low_value_branches(values, econ, market):
    low = values.follower_low
    g, b = values.roots.gamma, values.roots.beta
    # waiting below z1 is the bare option
    z = 0.3
    assert low.value(z) == pytest.approx(low.a0_coef * z**g, rel=1e-12)
    # copy region pays the copy reward
    z = 1.0
    assert low.value(z) == pytest.approx(10.0 * z - 2.0, rel=1e-12)
    # the inner window carries both option terms
    z = 1.6
    expected = low.b0_coef * z**g - low.c0_coef * z**b
    assert low.value(z) == pytest.approx(expected, rel=1e-12)
    # above z3 the fresh-draw reward applies
    z = 2.5
    assert low.value(z) == pytest.approx(15.0 * z - 10.0, rel=1e-12)


def test_smooth_pasting_gaps_tiny(values):
    for summary in (
        low_solution_summary(values.follower_low),
        high_solution_summary(values.follower_high),
    ):
        for row in summary["pasting"]:
            assert abs(row["value_gap"]) < 1e-10
            assert abs(row["slope_gap"]) < 1e-10


def test_low_value_monotone(values):
    zs = np.geomspace(0.05, 5.0, 400)
    vals = values.follower_low.value(zs)
    assert np.all(np.diff(vals) > 0.0)


def test_always_innovate_solution(market, econ_ai):
    low = solve_low(market, econ_ai)
    assert low.regime is FollowerRegime.ALWAYS_INNOVATE
    assert low.z1 is None and low.z2 is None
    assert low.a0_coef is None and low.c0_coef is None
    assert low.z3 == pytest.approx(1.808491542171281, rel=1e-12)
    assert low.b0_coef == pytest.approx(6.700964187614887, rel=1e-12)
    g = char_roots(market).gamma
    assert low.value(1.0) == pytest.approx(low.b0_coef)
    assert low.value(0.5) == pytest.approx(low.b0_coef * 0.5**g, rel=1e-12)
    assert low.value(2.0) == pytest.approx(15.0 * 2.0 - 10.0, rel=1e-12)


def test_follower_policy_inner_wait(values):
    low, high = values.follower_low, values.follower_high
    assert follower_policy(0.3, "low", low) == "wait"
    assert follower_policy(1.0, "low", low) == "copy"
    assert follower_policy(1.6, "low", low) == "wait"
    assert follower_policy(2.5, "low", low) == "innovate"
    assert follower_policy(0.1, "high", high) == "wait"
    assert follower_policy(0.5, "high", high) == "copy"
    with pytest.raises(ValueError, match="outcome"):
        follower_policy(1.0, "medium", low)


def test_follower_policy_always_innovate(market, econ_ai):
    low = solve_low(market, econ_ai)
    assert follower_policy(1.0, "low", low) == "wait"
    assert follower_policy(2.0, "low", low) == "innovate"


def test_follower_value_mixes_outcomes(values, econ):
    low, high = values.follower_low, values.follower_high
    for z in (0.3, 1.0, 1.6, 2.5):
        expected = 0.5 * high.value(z) + 0.5 * low.value(z)
        assert follower_value(z, low, high, econ) == pytest.approx(expected)
        assert values.F(z) == pytest.approx(expected)


def test_summary_shapes(values):
    s = low_solution_summary(values.follower_low)
    assert s["regime"] == "InnerWait"
    assert len(s["pasting"]) == 3
    s_h = high_solution_summary(values.follower_high)
    assert set(s_h) == {"z_h", "pasting"}
