"""Irreversible-investment timing duopoly under geometric Brownian demand.

Two firms face a one-shot technology investment whose quality is revealed
by whoever moves first.  The package solves the follower and leader
optimal-stopping problems in closed form, locates the demand bands where
the firms race to preempt each other, assembles the asymmetric
equilibrium profile, and verifies every piece against independent Monte
Carlo simulation.  The ``timing-game`` console script exposes the same
machinery as subcommands.
"""

from .errors import (
    ConfigError,
    GeometryError,
    InconsistentParameterError,
    RegimeError,
    ScenarioShapeError,
    SolverConvergenceError,
    UndefinedPayoffError,
)
from .params import (
    CharRoots,
    DerivedCoeffs,
    EconParams,
    MarketParams,
    PiecewiseValue,
    char_roots,
    cournot_value,
    derived_coeffs,
    derived_summary,
    econ_from_config,
    load_config,
    market_from_config,
    write_json,
)
from .gbm import (
    MCResult,
    SimConfig,
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
from .follower import (
    FollowerHighSolution,
    FollowerLowSolution,
    FollowerRegime,
    classify_regime,
    solve_high,
    solve_low,
)
from .leader import LeaderSolution, leader_solution, monopoly_term
from .equilibrium import (
    BSets,
    EquilibriumProfile,
    PreemptionIntervals,
    ValueFunctions,
    alpha_at,
    alpha_profile,
    bsets_report,
    build_profile,
    build_value_functions,
    check_scenario,
    classify_demand,
    compute_b_sets,
    preemption_intervals,
    vacuum_classification,
)
from .game import (
    CounterexampleReport,
    DeviationReport,
    SubgameValues,
    default_threshold_family,
    deviation_test,
    equilibrium_profile_specs,
    simulate_subgame,
    stop_outcome,
    symmetric_counterexample,
    w_payoff,
)

__all__ = [
    "BSets",
    "CharRoots",
    "ConfigError",
    "CounterexampleReport",
    "DerivedCoeffs",
    "DeviationReport",
    "EconParams",
    "EquilibriumProfile",
    "FollowerHighSolution",
    "FollowerLowSolution",
    "FollowerRegime",
    "GeometryError",
    "InconsistentParameterError",
    "LeaderSolution",
    "MCResult",
    "MarketParams",
    "PiecewiseValue",
    "PreemptionIntervals",
    "RegimeError",
    "ScenarioShapeError",
    "SimConfig",
    "SolverConvergenceError",
    "SubgameValues",
    "UndefinedPayoffError",
    "ValueFunctions",
    "alpha_at",
    "alpha_profile",
    "bsets_report",
    "build_profile",
    "build_value_functions",
    "char_roots",
    "check_scenario",
    "classify_demand",
    "classify_regime",
    "compute_b_sets",
    "cournot_value",
    "default_threshold_family",
    "derived_coeffs",
    "derived_summary",
    "deviation_test",
    "discount_at_hit",
    "econ_from_config",
    "equilibrium_profile_specs",
    "generator_residual",
    "hit_upper_first_prob",
    "leader_solution",
    "load_config",
    "market_from_config",
    "mc_hit_discount",
    "mc_policy_value",
    "mc_policy_value_set",
    "mc_two_sided_hit",
    "monopoly_term",
    "preemption_intervals",
    "sim_from_config",
    "simulate_paths",
    "simulate_subgame",
    "solve_high",
    "solve_low",
    "stop_outcome",
    "symmetric_counterexample",
    "two_sided_functionals",
    "vacuum_classification",
    "w_payoff",
    "write_json",
]

__version__ = "0.1.0"
