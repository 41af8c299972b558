import math

import numpy as np
import pytest

from timing_game import (
    SimConfig,
    UndefinedPayoffError,
    default_threshold_family,
    deviation_test,
    equilibrium_profile_specs,
    simulate_subgame,
    stop_outcome,
    symmetric_counterexample,
    two_sided_functionals,
    w_payoff,
)
from timing_game.game import (
    StrategyRegion,
    StrategySpec,
    never_invest_spec,
    stop_below_spec,
    threshold_spec,
)

L_VAL, F_VAL, C_VAL = 9.0, 4.0, 1.0


def test_w_payoff_pure_roles():
    assert w_payoff(1.0, 0.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL) == (L_VAL, F_VAL)
    assert w_payoff(0.0, 1.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL) == (F_VAL, L_VAL)
    assert w_payoff(1.0, 1.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL) == (C_VAL, C_VAL)


def test_w_payoff_swap_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(100):
        a, b = rng.uniform(0.0, 1.0, 2)
        if a + b == 0.0:
            continue
        w_ab = w_payoff(a, b, 0.0, 0.0, L_VAL, F_VAL, C_VAL)
        w_ba = w_payoff(b, a, 0.0, 0.0, L_VAL, F_VAL, C_VAL)
        assert w_ab[0] == pytest.approx(w_ba[1])
        assert w_ab[1] == pytest.approx(w_ba[0])


def test_w_payoff_indifference_at_rival_ratio():
    ratio = (L_VAL - F_VAL) / (L_VAL - C_VAL)
    for own in np.linspace(0.0, 1.0, 11):
        w_i, _ = w_payoff(float(own), ratio, 0.0, 0.0, L_VAL, F_VAL, C_VAL)
        assert w_i == pytest.approx(F_VAL, rel=1e-12)


def test_w_payoff_zero_intensity_uses_derivatives():
    assert w_payoff(0.0, 0.0, 1.0, 0.0, L_VAL, F_VAL, C_VAL) == (L_VAL, F_VAL)
    assert w_payoff(0.0, 0.0, 0.0, 1.0, L_VAL, F_VAL, C_VAL) == (F_VAL, L_VAL)
    w_i, w_j = w_payoff(0.0, 0.0, 1.0, 1.0, L_VAL, F_VAL, C_VAL)
    assert w_i == w_j == pytest.approx(0.5 * (L_VAL + F_VAL))
    with pytest.raises(UndefinedPayoffError):
        w_payoff(0.0, 0.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL)
    with pytest.raises(ValueError, match="alpha_i"):
        w_payoff(1.5, 0.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL)


def test_stop_outcome_roles_and_discount():
    out = stop_outcome(2.0, 1.0, 0.0, 0.0, 0.0, L_VAL, F_VAL, C_VAL, rate=0.2)
    assert out.roles == "i_leads"
    assert out.w_i == pytest.approx(math.exp(-0.4) * L_VAL)
    assert out.w_j == pytest.approx(math.exp(-0.4) * F_VAL)
    assert stop_outcome(0.0, 0.0, 1.0, 0.0, 0.0, *([1.0] * 3), rate=0.2).roles == (
        "j_leads"
    )
    assert stop_outcome(0.0, 1.0, 1.0, 0.0, 0.0, *([1.0] * 3), rate=0.2).roles == (
        "simultaneous"
    )
    assert stop_outcome(0.0, 0.5, 0.5, 0.0, 0.0, *([1.0] * 3), rate=0.2).roles == (
        "coin_flip_mix"
    )
    assert stop_outcome(0.0, 0.0, 0.0, 1.0, 1.0, *([1.0] * 3), rate=0.2).roles == (
        "coin_flip_mix"
    )


def test_spec_builders(values):
    spec = threshold_spec(1.5)
    assert spec.alpha(1.0, values) == 0.0
    assert spec.alpha(1.5, values) == 1.0
    assert spec.alpha(2.0, values) == 1.0
    assert spec.active_pieces() == ((1.5, math.inf),)

    spec = stop_below_spec(0.5)
    assert spec.alpha(0.3, values) == 1.0
    assert spec.alpha(0.8, values) == 0.0

    spec = never_invest_spec()
    assert spec.alpha(10.0, values) == 0.0
    assert spec.active_pieces() == ()


def test_spec_validation():
    with pytest.raises(ValueError, match="rule"):
        StrategyRegion(0.0, 1.0, "sometimes")
    with pytest.raises(ValueError, match="bounds"):
        StrategyRegion(1.0, 1.0, "zero")
    with pytest.raises(ValueError, match="outside region"):
        StrategyRegion(0.0, 1.0, "indicator", pieces=((0.5, 2.0),))
    with pytest.raises(ValueError, match="cover"):
        StrategySpec(regions=(StrategyRegion(0.0, 1.0, "zero"),))
    with pytest.raises(ValueError, match="contiguous"):
        StrategySpec(
            regions=(
                StrategyRegion(0.0, 1.0, "zero"),
                StrategyRegion(2.0, math.inf, "zero"),
            )
        )


def test_profile_specs_by_region(profile, values, intervals, bsets):
    iv = intervals

    # from below the first racing band the left singleton is the band edge
    # itself, so firm i has no interior stop and both arm at the edge
    spec_i, spec_j = equilibrium_profile_specs(profile, values, 0.02)
    assert spec_i.active_pieces() == ((iv.a1_lo, iv.a1_hi),)
    assert spec_j.active_pieces() == ((iv.a1_lo, iv.a1_hi),)
    assert spec_i.alpha(0.5 * (iv.a1_lo + iv.a1_hi), values) > 0.0

    # between the bands: the middle region's left boundary is a genuine
    # falling-path stop for firm i, the tangency point is dropped
    spec_i, spec_j = equilibrium_profile_specs(profile, values, 0.9)
    assert spec_i.active_pieces() == (
        (iv.a1_hi, iv.a1_hi),
        (iv.a2_lo, iv.a2_hi),
    )
    assert spec_j.active_pieces() == ((iv.a2_lo, iv.a2_hi),)
    assert spec_i.alpha(iv.a1_hi, values) == 1.0
    assert spec_j.alpha(iv.a1_hi, values) == 0.0

    # from the top region firm j is out of the game for good
    spec_i, spec_j = equilibrium_profile_specs(profile, values, 3.0)
    assert spec_j.active_pieces() == ()
    pieces = spec_i.active_pieces()
    assert pieces[0][0] == pytest.approx(iv.a2_hi)
    assert pieces[-1][1] == math.inf  # affine tail keeps investing
    assert spec_i.alpha(2.0 * bsets.z_max_bound, values) == 1.0


def test_simulate_subgame_immediate_inside_racing_band(profile, values, sim_small):
    # starting inside a racing band stops the game on the spot
    z0 = 0.2
    sv = simulate_subgame(z0, 0.0, profile, sim_small, values)
    assert sv.immediate
    assert sv.v_i.stderr == 0.0
    a = float(
        (values.L(z0) - values.F(z0)) / (values.L(z0) - values.C(z0))
    )
    w_i, w_j = w_payoff(a, a, 0.0, 0.0, float(values.L(z0)), float(values.F(z0)),
                        float(values.C(z0)))
    assert sv.v_i.estimate == pytest.approx(w_i)
    assert sv.v_j.estimate == pytest.approx(w_j)


def test_simulate_subgame_matches_two_sided_oracle(
    profile, values, intervals, sim_small, market
):
    # between the bands the stop is the first exit from (a1_hi, a2_lo):
    # firm i invests alone at the bottom, both arm at the top edge
    z0 = 1.0
    sv = simulate_subgame(z0, 0.0, profile, sim_small, values)
    assert not sv.immediate
    assert sv.cell[0] == pytest.approx(intervals.a1_hi)
    assert sv.cell[1] == pytest.approx(intervals.a2_lo)

    tsf = two_sided_functionals(z0, intervals.a1_hi, intervals.a2_lo,
                                market, values.roots)
    lo, hi = intervals.a1_hi, intervals.a2_lo
    top = 0.5 * (float(values.L(hi)) + float(values.F(hi)))
    exact_i = tsf.disc_lower * float(values.L(lo)) + tsf.disc_upper * top
    exact_j = tsf.disc_lower * float(values.F(lo)) + tsf.disc_upper * top
    assert abs(sv.v_i.estimate - exact_i) < 3.0 * sv.v_i.stderr
    assert abs(sv.v_j.estimate - exact_j) < 3.0 * sv.v_j.stderr


def test_simulate_subgame_below_first_band(profile, values, intervals, sim_small):
    # only an upper wall: one-sided hit of the first racing edge
    from timing_game import discount_at_hit

    z0 = 0.02
    sv = simulate_subgame(z0, 0.0, profile, sim_small, values)
    assert sv.cell == (None, intervals.a1_lo)
    edge = intervals.a1_lo
    tie = 0.5 * (float(values.L(edge)) + float(values.F(edge)))
    exact = float(discount_at_hit(z0, edge, values.roots)) * tie
    assert abs(sv.v_i.estimate - exact) < 3.0 * sv.v_i.stderr
    assert sv.v_i.estimate == pytest.approx(sv.v_j.estimate, abs=1e-12)


def test_simulate_subgame_discounts_start_time(profile, values, sim_small):
    base = simulate_subgame(0.2, 0.0, profile, sim_small, values)
    later = simulate_subgame(0.2, 2.0, profile, sim_small, values)
    scale = math.exp(-values.market.r * 2.0)
    assert later.v_i.estimate == pytest.approx(scale * base.v_i.estimate)


def test_simulate_subgame_validation(profile, values, sim_small):
    with pytest.raises(ValueError, match="z0"):
        simulate_subgame(0.0, 0.0, profile, sim_small, values)
    with pytest.raises(ValueError, match="t0"):
        simulate_subgame(1.0, -1.0, profile, sim_small, values)


def test_deviation_mimicking_profile_changes_nothing(
    profile, values, intervals, sim_small
):
    # a threshold equal to the firm's own next profile stop reproduces the
    # baseline path by path, so the improvement is exactly zero
    rep = deviation_test(profile, "i", [intervals.a1_lo], 0.02, sim_small, values)
    assert rep.max_improvement == 0.0
    assert rep.max_improvement_se == 0.0
    assert rep.best_threshold == pytest.approx(intervals.a1_lo)

    rep = deviation_test(profile, "j", [intervals.a2_lo], 0.95, sim_small, values)
    assert rep.max_improvement == 0.0


def test_deviation_report_fields(profile, values, sim_small):
    family = default_threshold_family(values, 0.95, n=8)
    rep = deviation_test(profile, "i", family, 0.95, sim_small, values)
    assert rep.firm == "i"
    assert len(rep.candidates) == 8
    payload = rep.to_json()
    assert set(payload) >= {
        "firm", "z0", "baseline", "max_improvement", "max_improvement_se",
        "best_threshold", "candidates",
    }
    # no candidate may beat the equilibrium profile by a significant margin
    floor = max(3.0 * rep.max_improvement_se, 1e-6 * max(1.0, abs(rep.baseline)))
    assert rep.max_improvement <= floor


def test_deviation_test_validation(profile, values, sim_small):
    with pytest.raises(ValueError, match="firm"):
        deviation_test(profile, "k", [1.0], 0.95, sim_small, values)
    with pytest.raises(ValueError, match="positive"):
        deviation_test(profile, "i", [-1.0], 0.95, sim_small, values)


def test_default_threshold_family_brackets_start(values):
    fam = default_threshold_family(values, 0.95, n=20)
    assert fam.shape == (20,)
    assert fam[0] < 0.95 < fam[-1]
    assert fam[-1] >= 1.5 * values.follower_low.z3 - 1e-9


def test_symmetric_counterexample_reference(values):
    cfg = SimConfig(n_paths=3000, dt=0.01, horizon=30.0, seed=13)
    rep = symmetric_counterexample(None, values, cfg)
    assert rep.found
    # the scan for a joint-value dominance point is deterministic
    assert rep.z0 == pytest.approx(2.4570664929047172, rel=1e-9)
    assert rep.sup_leader == pytest.approx(25.095182665991985, rel=1e-9)
    names = [c["name"] for c in rep.classes]
    assert names == [
        "never_invest", "joint_stop_follower_better", "joint_stop_leader_better",
    ]
    for entry in rep.classes:
        floor = max(3.0 * entry["gain_se"], 1e-9)
        assert entry["gain"] > floor
    payload = rep.to_json()
    assert payload["found"] is True
    assert len(payload["classes"]) == 3


def test_symmetric_counterexample_rejects_bad_start(values):
    cfg = SimConfig(n_paths=100, dt=0.05, horizon=5.0, seed=1)
    with pytest.raises(ValueError, match="dominate"):
        symmetric_counterexample(1.0, values, cfg)
