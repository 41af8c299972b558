import math

import numpy as np
import pytest

from timing_game import (
    ConfigError,
    MarketParams,
    SimConfig,
    char_roots,
    discount_at_hit,
    generator_residual,
    hit_upper_first_prob,
    mc_hit_discount,
    mc_policy_value,
    mc_policy_value_set,
    mc_two_sided_hit,
    sim_from_config,
    simulate_paths,
    two_sided_functionals,
)
from timing_game.gbm import chunk_rngs
from timing_game.leader import exit_discount_coeffs


def test_sim_config_validation():
    with pytest.raises(ValueError, match="n_paths"):
        SimConfig(n_paths=0, dt=0.01, horizon=1.0, seed=1)
    with pytest.raises(ValueError, match="dt"):
        SimConfig(n_paths=10, dt=0.0, horizon=1.0, seed=1)
    with pytest.raises(ValueError, match="horizon"):
        SimConfig(n_paths=10, dt=0.5, horizon=0.2, seed=1)
    with pytest.raises(ValueError, match="seed"):
        SimConfig(n_paths=10, dt=0.01, horizon=1.0, seed=-1)
    assert SimConfig(n_paths=10, dt=0.25, horizon=1.0, seed=1).n_steps == 4


def test_sim_from_config():
    cfg = {"n_paths": 100, "dt": 0.01, "horizon": 2.0, "seed": 5}
    sim = sim_from_config(cfg)
    assert sim.n_paths == 100
    with pytest.raises(ConfigError, match="missing simulation"):
        sim_from_config({"n_paths": 100})


def test_chunk_rngs_cover_paths():
    assert sum(c for c, _ in chunk_rngs(9, 7)) == 7
    assert sum(c for c, _ in chunk_rngs(9, 1_000_001)) == 1_000_001


def test_discount_at_hit(market):
    roots = char_roots(market)
    assert discount_at_hit(1.0, 1.0, roots) == pytest.approx(1.0)
    assert discount_at_hit(0.5, 1.0, roots) == pytest.approx(0.5**roots.gamma)
    assert discount_at_hit(2.0, 1.0, roots) == pytest.approx(2.0**roots.beta)
    with pytest.raises(ValueError, match="positive"):
        discount_at_hit(0.0, 1.0, roots)


def test_hit_upper_first_prob_limits(market):
    lo, hi = 0.6, 1.8
    assert hit_upper_first_prob(lo * 1.0000001, lo, hi, market) < 1e-5
    assert hit_upper_first_prob(hi * 0.9999999, lo, hi, market) > 1.0 - 1e-5
    with pytest.raises(ValueError, match="lower"):
        hit_upper_first_prob(0.5, lo, hi, market)
    with pytest.raises(ValueError, match="variant"):
        hit_upper_first_prob(1.0, lo, hi, market, variant="bogus")


def test_hit_upper_first_prob_matches_scale_function(market):
    # independent evaluation through the scale function of log demand:
    # s(x) = exp(-2 mu x / sigma^2), mu = alpha - sigma^2/2, and
    # P = (S(x0) - S(lo)) / (S(hi) - S(lo)) with S the antiderivative
    lo, hi = 0.6, 1.8
    mu = market.alpha - 0.5 * market.sigma**2
    kappa = -2.0 * mu / market.sigma**2

    def big_s(x: float) -> float:
        return math.exp(kappa * x) / kappa

    for z in (0.7, 1.0, 1.5):
        direct = (big_s(math.log(z)) - big_s(math.log(lo))) / (
            big_s(math.log(hi)) - big_s(math.log(lo))
        )
        assert hit_upper_first_prob(z, lo, hi, market) == pytest.approx(
            direct, rel=1e-12
        )


def test_hit_prob_variants_differ(market):
    p_log = hit_upper_first_prob(1.0, 0.6, 1.8, market, variant="log_drift")
    p_alt = hit_upper_first_prob(1.0, 0.6, 1.8, market, variant="abs_drift")
    assert abs(p_log - p_alt) > 0.1


def test_two_sided_functionals_solve_boundary_problem(market):
    roots = char_roots(market)
    lo, hi = 0.6, 1.8
    (p_lo, q_lo), (p_up, q_up) = exit_discount_coeffs(lo, hi, roots)
    for z in (0.7, 1.0, 1.6):
        tsf = two_sided_functionals(z, lo, hi, market, roots)
        assert tsf.disc_lower == pytest.approx(
            p_lo * z**roots.gamma + q_lo * z**roots.beta, rel=1e-10
        )
        assert tsf.disc_upper == pytest.approx(
            p_up * z**roots.gamma + q_up * z**roots.beta, rel=1e-10
        )
        assert 0.0 < tsf.disc_lower + tsf.disc_upper < 1.0
        assert tsf.p_upper_first == pytest.approx(
            hit_upper_first_prob(z, lo, hi, market)
        )


def test_generator_residual_flags_non_solutions(market, values):
    low = values.follower_low
    # the waiting branch solves the operator equation
    pts = np.geomspace(0.1, 0.9 * low.z1, 20)
    res = generator_residual(low.value, pts, market)
    assert np.max(np.abs(res)) < 1e-6
    # an affine reward branch without its flow does not
    mid = np.array([math.sqrt(low.z1 * low.z2)])
    assert abs(generator_residual(low.value, mid, market)) > 1e-2


def test_generator_residual_with_source(market, econ, values):
    # leader below the copy threshold: flow (pi_low + xi) z with the cost sunk
    flow = econ.pi_low + econ.xi
    source = lambda z: flow * z - market.r * econ.inv_cost
    pts = np.geomspace(0.05, 0.95 * values.follower_low.z1, 20)
    res = generator_residual(values.leader.low_value, pts, market, source)
    assert np.max(np.abs(res)) < 1e-6


def test_simulate_paths_moments(market):
    cfg = SimConfig(n_paths=20_000, dt=0.01, horizon=1.0, seed=42)
    paths = simulate_paths(1.0, cfg, market)
    assert paths.shape == (20_000, cfg.n_steps + 1)
    assert np.all(paths[:, 0] == 1.0)
    # terminal mean e^{alpha T}; lognormal se = mean * sqrt(e^{sigma^2 T} - 1) / sqrt(n)
    term = paths[:, -1]
    mean_exact = math.exp(market.alpha * 1.0)
    se = term.std(ddof=1) / math.sqrt(cfg.n_paths)
    assert abs(term.mean() - mean_exact) < 3.0 * se
    log_mean = np.log(term).mean()
    drift_exact = market.alpha - 0.5 * market.sigma**2
    log_se = np.log(term).std(ddof=1) / math.sqrt(cfg.n_paths)
    assert abs(log_mean - drift_exact) < 3.0 * log_se


def test_mc_policy_value_matches_closed_form(market, values):
    # waiting below the copy threshold prices the option value exactly
    low = values.follower_low
    d_a1, d_k1 = 10.0, 2.0
    cfg = SimConfig(n_paths=20_000, dt=0.005, horizon=30.0, seed=7)
    res = mc_policy_value(
        0.4,
        [(low.z1, math.inf)],
        lambda z: d_a1 * z - d_k1,
        cfg,
        market,
        bridge_barriers=(None, low.z1),
    )
    exact = float(low.value(0.4))
    assert abs(res.estimate - exact) < 3.0 * res.stderr
    assert res.stderr < 0.02
    assert res.cap_fraction < 0.25


def test_mc_policy_value_set_matches_single_calls(market, values):
    low = values.follower_low
    cfg = SimConfig(n_paths=2000, dt=0.01, horizon=20.0, seed=19)
    reward_a = lambda z: 10.0 * z - 2.0
    reward_b = lambda z: 10.0 * z
    policy = [(low.z1, math.inf)]
    walls = (None, low.z1)
    pair = mc_policy_value_set(
        0.4, policy, [(reward_a, 0.0), (reward_b, 31.0)], cfg, market,
        bridge_barriers=walls,
    )
    solo_a = mc_policy_value(0.4, policy, reward_a, cfg, market, bridge_barriers=walls)
    solo_b = mc_policy_value(
        0.4, policy, reward_b, cfg, market, flow_coef=31.0, bridge_barriers=walls
    )
    # shared-ensemble pricing consumes the same randomness: bit identical
    assert pair[0].estimate == solo_a.estimate
    assert pair[0].stderr == solo_a.stderr
    assert pair[1].estimate == solo_b.estimate
    assert pair[1].stderr == solo_b.stderr


def test_mc_policy_value_immediate_stop(market):
    cfg = SimConfig(n_paths=100, dt=0.01, horizon=1.0, seed=3)
    res = mc_policy_value(2.0, [(1.5, math.inf)], lambda z: 10.0 * z, cfg, market)
    assert res.estimate == pytest.approx(20.0)
    assert res.stderr == 0.0


def test_mc_two_sided_hit_matches_formula(market):
    cfg = SimConfig(n_paths=20_000, dt=0.01, horizon=40.0, seed=23)
    res = mc_two_sided_hit(1.0, 0.6, 1.8, cfg, market)
    exact = hit_upper_first_prob(1.0, 0.6, 1.8, market, variant="log_drift")
    assert abs(res.estimate - exact) < 3.0 * res.stderr
    assert res.stderr < 0.005


def test_mc_hit_discount_matches_formula(market):
    roots = char_roots(market)
    cfg = SimConfig(n_paths=20_000, dt=0.01, horizon=40.0, seed=29)
    res = mc_hit_discount(1.0, 1.6, cfg, market)
    exact = float(discount_at_hit(1.0, 1.6, roots))
    assert abs(res.estimate - exact) < 3.0 * res.stderr


def test_mc_result_unpacks():
    cfg = SimConfig(n_paths=500, dt=0.01, horizon=5.0, seed=1)
    market = MarketParams(alpha=0.1, sigma=0.3, r=0.2)
    est, se = mc_two_sided_hit(1.0, 0.5, 2.0, cfg, market)
    assert 0.0 <= est <= 1.0
    assert se >= 0.0
