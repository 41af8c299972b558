import math

import numpy as np
import pytest

from timing_game import char_roots, monopoly_term
from timing_game.leader import (
    exit_discount_coeffs,
    leader_high,
    leader_low,
    leader_value,
)


def test_exit_discount_boundary_values(market):
    roots = char_roots(market)
    lo, hi = 0.7, 1.9
    (p_lo, q_lo), (p_up, q_up) = exit_discount_coeffs(lo, hi, roots)

    def eval_pair(p, q, z):
        return p * z**roots.gamma + q * z**roots.beta

    assert eval_pair(p_lo, q_lo, lo) == pytest.approx(1.0, rel=1e-12)
    assert eval_pair(p_lo, q_lo, hi) == pytest.approx(0.0, abs=1e-12)
    assert eval_pair(p_up, q_up, lo) == pytest.approx(0.0, abs=1e-12)
    assert eval_pair(p_up, q_up, hi) == pytest.approx(1.0, rel=1e-12)


def test_monopoly_term_edges_and_interior(market, econ, values):
    roots = values.roots
    lo, hi = values.follower_low.z2, values.follower_low.z3
    assert monopoly_term(lo, lo, hi, market, econ, roots) == pytest.approx(
        0.0, abs=1e-9
    )
    assert monopoly_term(hi, lo, hi, market, econ, roots) == pytest.approx(
        0.0, abs=1e-9
    )
    mid = math.sqrt(lo * hi)
    assert monopoly_term(mid, lo, hi, market, econ, roots) > 0.0
    with pytest.raises(ValueError, match="band"):
        monopoly_term(0.5 * lo, lo, hi, market, econ, roots)


def test_monopoly_term_decomposition(market, econ, values):
    # flow value minus the discounted exit-state values
    roots = values.roots
    lo, hi = values.follower_low.z2, values.follower_low.z3
    m = econ.xi / (market.r - market.alpha)
    from timing_game import two_sided_functionals

    for z in (1.5, 1.7, 1.9):
        tsf = two_sided_functionals(z, lo, hi, market, roots)
        direct = m * (z - lo * tsf.disc_lower - hi * tsf.disc_upper)
        assert monopoly_term(z, lo, hi, market, econ, roots) == pytest.approx(
            direct, rel=1e-10
        )


def test_leader_low_branches(market, econ, values):
    low = values.follower_low
    pv = values.leader.low_value
    assert pv.breakpoints == (low.z1, low.z2, low.z3)
    # rival copies on [z1, z2] and buys fresh above z3: duopoly flow, cost sunk
    for z in (0.8, 1.1):
        assert pv(z) == pytest.approx(10.0 * z - 10.0, rel=1e-12)
    assert pv(2.5) == pytest.approx(10.0 * 2.5 - 10.0, rel=1e-12)
    # waiting-for-rival branches add the expected monopoly flow
    roots = values.roots
    z = 1.6
    expected = 10.0 * z - 10.0 + monopoly_term(z, low.z2, low.z3, market, econ, roots)
    assert pv(z) == pytest.approx(expected, rel=1e-10)
    # the below-threshold branch carries the one-sided monopoly term
    z = 0.3
    m = econ.xi / (market.r - market.alpha)
    g = roots.gamma
    one_sided = m * (z - low.z1 * (z / low.z1) ** g)
    assert pv(z) == pytest.approx(10.0 * z - 10.0 + one_sided, rel=1e-10)


def test_leader_high_branches(market, econ, values):
    high = values.follower_high
    pv = values.leader.high_value
    assert pv.breakpoints == (high.z_h,)
    assert pv(1.0) == pytest.approx(20.0 * 1.0 - 10.0, rel=1e-12)
    z = 0.15
    m = econ.xi / (market.r - market.alpha)
    g = values.roots.gamma
    one_sided = m * (z - high.z_h * (z / high.z_h) ** g)
    assert pv(z) == pytest.approx(20.0 * z - 10.0 + one_sided, rel=1e-10)


def test_leader_value_continuity(values):
    # the assembled curve is continuous at every follower threshold
    for pv in (values.leader.low_value, values.leader.high_value,
               values.leader.combined):
        for bp in pv.breakpoints:
            left = pv(bp * (1.0 - 1e-10))
            right = pv(bp)
            assert left == pytest.approx(right, rel=1e-7)


def test_leader_starts_at_sunk_cost(values):
    # as demand vanishes every flow dies but the investment cost stays paid
    assert values.leader.low_value(1e-9) == pytest.approx(-10.0, abs=1e-6)
    assert values.leader.high_value(1e-9) == pytest.approx(-10.0, abs=1e-6)


def test_combined_mixes_outcomes(values, econ):
    lead = values.leader
    assert set(lead.combined.breakpoints) == set(
        lead.low_value.breakpoints + lead.high_value.breakpoints
    )
    for z in (0.2, 0.4, 0.8, 1.6, 2.5):
        expected = 0.5 * lead.high_value(z) + 0.5 * lead.low_value(z)
        assert lead.combined(z) == pytest.approx(expected, rel=1e-12)
        assert values.L(z) == pytest.approx(expected, rel=1e-12)


def test_leader_equals_joint_value_when_both_settled(values):
    # on [z1, z2] both follower branches have invested: leading adds nothing
    for z in (0.6, 1.0, 1.3):
        assert values.L(z) == pytest.approx(float(values.C(z)), rel=1e-12)


def test_wrapper_functions(market, econ, values):
    lead = values.leader
    assert leader_low(1.6, lead.follower_low, market, econ) == pytest.approx(
        float(lead.low_value(1.6))
    )
    assert leader_high(0.15, lead.follower_high, market, econ) == pytest.approx(
        float(lead.high_value(0.15))
    )
    assert leader_value(1.6, lead, econ) == pytest.approx(float(lead.combined(1.6)))


def test_monopoly_term_vectorized(market, econ, values):
    lo, hi = values.follower_low.z2, values.follower_low.z3
    zs = np.linspace(lo, hi, 7)
    out = monopoly_term(zs, lo, hi, market, econ, values.roots)
    assert out.shape == zs.shape
    assert np.all(out >= -1e-9)
