import math

import numpy as np
import pytest

from timing_game import (
    EconParams,
    GeometryError,
    RegimeError,
    ScenarioShapeError,
    alpha_at,
    alpha_profile,
    bsets_report,
    build_value_functions,
    check_scenario,
    classify_demand,
    compute_b_sets,
    preemption_intervals,
    vacuum_classification,
)
from timing_game.equilibrium import intervals_report

REF_INTERVALS = (
    0.044419726778683034,
    0.4326584417811566,
    1.458538142423225,
    1.7552785842244627,
)


def test_scenario_holds_at_reference(values):
    rep = check_scenario(values)
    assert rep.ok
    assert rep.below_gap > 0.0 and rep.window_gap > 0.0
    assert rep.below_witness < values.follower_low.z1
    assert values.follower_low.z2 < rep.window_witness < values.follower_low.z3


def test_scenario_fails_for_small_bonus(market):
    econ_small = EconParams(
        pi_low=1.0, pi_high=2.0, xi=10.0, inv_cost=10.0, theta=0.8
    )
    weak = build_value_functions(market, econ_small)
    assert not check_scenario(weak).ok
    with pytest.raises(ScenarioShapeError, match="two interior intervals"):
        preemption_intervals(weak)


def test_scenario_rejects_always_innovate(market):
    econ_ai = EconParams(pi_low=1.0, pi_high=2.0, xi=30.0, inv_cost=10.0, theta=0.1)
    with pytest.raises(RegimeError, match="inner-window"):
        check_scenario(build_value_functions(market, econ_ai))


def test_preemption_intervals_reference(intervals):
    got = (intervals.a1_lo, intervals.a1_hi, intervals.a2_lo, intervals.a2_hi)
    for g, e in zip(got, REF_INTERVALS):
        assert g == pytest.approx(e, rel=1e-9)


def test_intervals_nest_inside_thresholds(values, intervals):
    low = values.follower_low
    assert intervals.a1_lo < low.z1
    assert low.z2 <= intervals.a2_lo + 1e-9
    assert intervals.a2_hi <= low.z3 + 1e-9


def test_interval_edges_are_ties(values, intervals):
    for edge in REF_INTERVALS:
        assert float(values.L(edge)) == pytest.approx(
            float(values.F(edge)), rel=1e-9
        )


def test_alpha_bounds_and_edges(values, intervals):
    for lo, hi in ((intervals.a1_lo, intervals.a1_hi),
                   (intervals.a2_lo, intervals.a2_hi)):
        interior = np.linspace(lo, hi, 301)[1:-1]
        a = alpha_at(interior, values.L, values.F, values.C)
        assert np.all(a >= 0.0) and np.all(a <= 1.0)
        assert np.max(a) > 0.05
        edges = alpha_at(np.array([lo, hi]), values.L, values.F, values.C)
        assert np.max(np.abs(edges)) < 1e-9


def test_alpha_at_rejects_degenerate_denominator(values):
    # leading and joint investment coincide when both follower branches
    # have already settled, so the ratio is undefined there
    with pytest.raises(GeometryError, match="joint-investment"):
        alpha_at(1.0, values.L, values.F, values.C)


def test_b_sets_reference(bsets, intervals):
    assert len(bsets.b1) == 1
    lo, hi = bsets.b1[0]
    assert lo == pytest.approx(intervals.a1_lo, rel=1e-9)
    assert hi == pytest.approx(intervals.a1_lo, rel=1e-9)

    assert len(bsets.b2) == 2
    assert bsets.b2[0][0] == pytest.approx(intervals.a1_hi, rel=1e-9)
    assert bsets.b2[0][1] - bsets.b2[0][0] < 1e-8
    assert bsets.b2[1][0] == pytest.approx(1.4585381424217665, rel=1e-9)
    assert bsets.b2[1][1] - bsets.b2[1][0] < 1e-8

    assert len(bsets.b3) == 2
    assert bsets.b3[0][0] == pytest.approx(intervals.a2_hi, rel=1e-9)
    assert bsets.b3[0][1] == pytest.approx(1.9199809021858116, rel=1e-6)
    assert bsets.b3[1][0] == pytest.approx(1.9772755405007203, rel=1e-6)
    assert bsets.b3[1][1] == pytest.approx(17.552785842227074, rel=1e-6)

    assert bsets.z_max_bound == pytest.approx(10.0 * intervals.a2_hi, rel=1e-12)
    assert bsets.tail_invest_ok


def test_b_set_membership_spot_checks(values, bsets, intervals):
    # investing now must beat waiting for any other entry point (sampled
    # densely), inside the set; strictly lose outside it
    g, b = values.roots.gamma, values.roots.beta

    def sup_over(y, z_lo, z_hi):
        zs = np.geomspace(z_lo, z_hi, 4000)
        disc = np.where(zs >= y, (y / zs) ** g, (y / zs) ** b)
        return float(np.max(disc * np.asarray(values.L(zs))))

    inside = math.sqrt(bsets.b3[1][0] * bsets.b3[1][1])
    sup = sup_over(inside, intervals.a2_hi, bsets.z_max_bound)
    assert float(values.L(inside)) >= sup - 1e-9 * abs(sup)

    gap_point = math.sqrt(bsets.b3[0][1] * bsets.b3[1][0])
    sup = sup_over(gap_point, intervals.a2_hi, bsets.z_max_bound)
    assert float(values.L(gap_point)) < sup - 1e-12 * abs(sup)

    vacuum_point = 0.9  # between the racing bands, outside both b2 points
    sup = sup_over(vacuum_point, intervals.a1_hi, intervals.a2_lo)
    assert float(values.L(vacuum_point)) < sup


def test_alpha_profile_and_labels(values, profile, intervals, bsets):
    iv = intervals
    racing_mid = math.sqrt(iv.a2_lo * iv.a2_hi)
    b3_mid = math.sqrt(bsets.b3[1][0] * bsets.b3[1][1])
    b3_gap = math.sqrt(bsets.b3[0][1] * bsets.b3[1][0])
    zs = np.array([0.02, racing_mid, b3_mid, b3_gap, 0.9, 2.0 * bsets.z_max_bound])
    a_i, a_j = alpha_profile(zs, profile, values)
    assert a_i.shape == zs.shape

    # below the first band: nobody moves
    assert a_i[0] == 0.0 and a_j[0] == 0.0
    # inside a racing band both play the indifference ratio
    assert 0.0 < a_i[1] <= 1.0
    assert a_i[1] == a_j[1]
    # no-regret pieces are firm i's alone
    assert a_i[2] == 1.0 and a_j[2] == 0.0
    assert a_i[3] == 0.0 and a_j[3] == 0.0
    # the vacuum: neither firm invests between the bands
    assert a_i[4] == 0.0 and a_j[4] == 0.0
    # past the truncation bound the affine-tail check licenses investing
    assert a_i[5] == 1.0 and a_j[5] == 0.0

    labels = [classify_demand(float(z), profile) for z in zs]
    assert labels == [
        "no_invest", "preempt_A2", "invest_B3", "no_invest", "vacuum", "invest_B3",
    ]
    assert classify_demand(0.2, profile) == "preempt_A1"
    assert classify_demand(intervals.a1_hi, profile) == "invest_B"


def test_alpha_profile_scalar(values, profile):
    a_i, a_j = alpha_profile(0.2, profile, values)
    assert isinstance(a_i, float) and isinstance(a_j, float)
    assert a_i == a_j > 0.0


def test_reports_shapes(values, intervals, bsets):
    rep = intervals_report(intervals)
    assert rep["region"] == "preemption"
    assert len(rep["intervals"]) == 2

    rep = bsets_report(bsets, intervals)
    assert [r["region"] for r in rep["regions"]] == ["B1", "B2", "B3"]
    assert rep["vacuum"] is True
    assert rep["tail_invest_ok"] is True
    assert len(rep["vacuum_intervals"]) >= 1
    lo, hi = rep["vacuum_intervals"][0]
    assert intervals.a1_hi <= lo < hi <= intervals.a2_lo + 1e-9

    cls = vacuum_classification(bsets, intervals)
    assert cls["vacuum"] is True
    assert cls["no_investment_at_low_demand"] is True
    assert cls["investment_in_first_racing_band"] is True
    assert cls["no_investment_between_racing_bands"] is True
    assert cls["investment_in_second_racing_band"] is True
    assert len(cls["bands"]) == 4
    assert cls["bands"][1]["mode"] == "preemption race"
    assert cls["bands"][3]["mode"] == "preemption race"
    assert cls["bands"][0]["investment"] == "partial"
    assert cls["bands"][2]["investment"] == "partial"


def test_value_function_bundle(values, market, econ):
    assert values.roots.gamma == pytest.approx(1.5838606961264898, rel=1e-12)
    z = np.array([0.5, 1.0, 1.7])
    mixed = 0.5 * values.follower_high.value(z) + 0.5 * values.follower_low.value(z)
    assert np.allclose(values.F(z), mixed)
    assert np.allclose(values.L(z), values.leader.combined(z))
    assert np.allclose(values.C(z), 15.0 * z - 10.0)


def test_compute_b_sets_respects_custom_bound(values, intervals):
    bs = compute_b_sets(values.L, values.roots, intervals, z_max_bound=25.0)
    assert bs.z_max_bound == 25.0
    assert bs.b3[-1][1] <= 25.0
