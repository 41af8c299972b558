"""Timing-game engine: region-based strategies, stopping payoffs, subgame
values, and the Monte Carlo deviation harnesses.

A strategy is an investment intensity alpha(z) in [0, 1] defined by a
partition of the demand axis into rule regions.  The game stops at the
first instant either firm's intensity is positive; intensities act as
per-round weights in the limit of infinitely fast rounds, so the role
split at the stop resolves in expectation:

    both at 1          -> joint investment, C each
    weights in (0, 2)  -> mixture of leader / follower / joint outcomes
    both at 0          -> right derivatives take over as weights

The equilibrium pair is not a single stationary profile: its regimes
switch permanently at first upward crossings of the racing-band edges.
A subgame therefore sees only the regimes still ahead of its starting
demand, which is why the pair is built per starting point.  Once demand
has ever been above the second racing band, the patient firm is out of
the game for good and the eager firm stops on its no-regret set alone.

The deviation tests price whole families of threshold strategies on one
shared path ensemble, so candidate-versus-equilibrium differences are
common-random-number accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .equilibrium import (
    EquilibriumProfile,
    ValueFunctions,
    alpha_at,
    preemption_intervals,
)
from .errors import UndefinedPayoffError
from .gbm import (
    MCResult,
    SimConfig,
    discount_at_hit,
    mc_hit_discount,
    mc_level_discounts,
    mc_policy_value,
)

__all__ = [
    "StrategyRegion",
    "StrategySpec",
    "GameOutcome",
    "SubgameValues",
    "DeviationCandidate",
    "DeviationReport",
    "CounterexampleReport",
    "w_payoff",
    "stop_outcome",
    "never_invest_spec",
    "threshold_spec",
    "stop_below_spec",
    "equilibrium_profile_specs",
    "default_threshold_family",
    "simulate_subgame",
    "deviation_test",
    "symmetric_counterexample",
]

_RULES = ("zero", "one", "indicator", "ratio")


@dataclass(frozen=True)
class StrategyRegion:
    """One rule region: demand interval [lo, hi] plus the intensity rule.

    ``pieces`` carries the indicator sub-intervals when rule is
    "indicator"; a zero-width piece is a legitimate stop, since a
    continuous path crossing the point hits it with probability one.
    ``dalpha`` is the right derivative assigned where the intensity
    evaluates to zero; only its size relative to the opponent's matters,
    in the both-zero stopping case.
    """

    lo: float
    hi: float
    rule: str
    pieces: tuple[tuple[float, float], ...] = ()
    dalpha: float = 0.0

    def __post_init__(self) -> None:
        if self.rule not in _RULES:
            raise ValueError(f"unknown intensity rule {self.rule!r}")
        if not (self.lo >= 0.0 and self.hi > self.lo):
            raise ValueError(f"bad region bounds ({self.lo}, {self.hi})")
        if self.dalpha < 0.0:
            raise ValueError("right derivative must be nonnegative")
        for p_lo, p_hi in self.pieces:
            if not (self.lo <= p_lo <= p_hi <= self.hi):
                raise ValueError(
                    f"indicator piece ({p_lo}, {p_hi}) outside region "
                    f"({self.lo}, {self.hi})"
                )


@dataclass(frozen=True)
class StrategySpec:
    """A simple strategy: contiguous rule regions partitioning (0, inf)."""

    regions: tuple[StrategyRegion, ...]

    def __post_init__(self) -> None:
        if not self.regions:
            raise ValueError("a strategy needs at least one region")
        if self.regions[0].lo != 0.0 or not math.isinf(self.regions[-1].hi):
            raise ValueError("regions must cover (0, inf)")
        for a, b in zip(self.regions, self.regions[1:]):
            if a.hi != b.lo:
                raise ValueError(
                    f"regions must be contiguous, got gap at ({a.hi}, {b.lo})"
                )

    def alpha(self, z: float, values: ValueFunctions) -> float:
        """Intensity at demand z; shared boundaries resolve to the larger value."""
        out = 0.0
        for reg in self.regions:
            if not (reg.lo <= z <= reg.hi):
                continue
            if reg.rule == "one":
                return 1.0
            if reg.rule == "indicator":
                if any(p_lo <= z <= p_hi for p_lo, p_hi in reg.pieces):
                    return 1.0
            elif reg.rule == "ratio":
                out = max(out, float(alpha_at(z, values.L, values.F, values.C)))
        return out

    def dalpha(self, z: float) -> float:
        out = 0.0
        for reg in self.regions:
            if reg.lo <= z <= reg.hi and reg.rule == "ratio":
                out = max(out, reg.dalpha)
        return out

    def active_pieces(self) -> tuple[tuple[float, float], ...]:
        """Closure of the investment set, as a merged interval union.

        Ratio regions contribute their whole closed interval: the
        intensity vanishes at the edges but turns positive immediately
        inside, so first entry into the closure is the stopping trigger.
        """
        raw: list[tuple[float, float]] = []
        for reg in self.regions:
            if reg.rule in ("one", "ratio"):
                raw.append((reg.lo, reg.hi))
            elif reg.rule == "indicator":
                raw.extend(reg.pieces)
        return _merge_pieces(raw)


def _merge_pieces(
    raw: Sequence[tuple[float, float]],
) -> tuple[tuple[float, float], ...]:
    # roundoff-sized gaps between pieces are joints, not waiting cells
    merged: list[tuple[float, float]] = []
    for lo, hi in sorted(raw):
        if merged and lo <= merged[-1][1] + 1e-9 * max(1.0, merged[-1][1]):
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


def _point_in(z: float, pieces: Sequence[tuple[float, float]]) -> bool:
    return any(lo <= z <= hi for lo, hi in pieces)


def never_invest_spec() -> StrategySpec:
    return StrategySpec(regions=(StrategyRegion(0.0, math.inf, "zero"),))


def threshold_spec(level: float) -> StrategySpec:
    """Invest at the first time demand reaches ``level`` from below."""
    if not level > 0.0:
        raise ValueError(f"threshold must be positive, got {level}")
    return StrategySpec(
        regions=(
            StrategyRegion(0.0, level, "zero"),
            StrategyRegion(level, math.inf, "one"),
        )
    )


def stop_below_spec(level: float) -> StrategySpec:
    """Invest at the first time demand is at or below ``level``."""
    if not level > 0.0:
        raise ValueError(f"stop level must be positive, got {level}")
    return StrategySpec(
        regions=(
            StrategyRegion(0.0, level, "one"),
            StrategyRegion(level, math.inf, "zero"),
        )
    )


def _band_pieces(
    pieces: Sequence[tuple[float, float]],
    lo: float,
    hi: float,
    keep_left_edge: bool,
) -> tuple[tuple[float, float], ...]:
    """Clip no-regret pieces to the waiting band [lo, hi).

    The band's left boundary is itself a legitimate stop when membership
    is left-closed, so a piece touching it survives even at zero width.
    Pieces reduced to a point elsewhere are dropped: at the right
    boundary the adjacent racing band resolves to the same value, and an
    interior tangency point is value-neutral by its defining equality.
    """
    tol = 1e-9 * max(1.0, hi)
    out = []
    for p_lo, p_hi in pieces:
        c_lo, c_hi = max(p_lo, lo), min(p_hi, hi)
        if c_hi < c_lo:
            continue
        if c_hi - c_lo <= tol:
            if keep_left_edge and c_lo - lo <= tol:
                out.append((lo, lo))
            continue
        out.append((c_lo, c_hi))
    return tuple(out)


def equilibrium_profile_specs(
    profile: EquilibriumProfile, values: ValueFunctions, z0: float
) -> tuple[StrategySpec, StrategySpec]:
    """The equilibrium pair for the subgame starting at demand z0.

    The pair is stationary only within a starting band, because racing
    regimes retire permanently once demand has risen past them.  From
    below the first racing band, the eager firm i stops on its low
    no-regret pieces and both firms race at the band's edge.  Between
    the bands, the retired first race never re-arms: i stops on the
    middle no-regret pieces (whose left boundary point is a genuine
    falling-path stop) and both race only at the second band.  From the
    second band's top edge onward, j never invests again and i stops on
    the high no-regret pieces plus, when the affine-tail check passed,
    everything past the truncation bound.
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    iv, bs = profile.intervals, profile.bsets
    bound = bs.z_max_bound

    def race(lo: float, hi: float) -> StrategyRegion:
        return StrategyRegion(lo, hi, "ratio", dalpha=1.0)

    if z0 < iv.a1_lo:
        regions_i = (
            StrategyRegion(
                0.0, iv.a1_lo, "indicator",
                _band_pieces(bs.b1, 0.0, iv.a1_lo, keep_left_edge=False),
            ),
            race(iv.a1_lo, iv.a1_hi),
            StrategyRegion(iv.a1_hi, math.inf, "zero"),
        )
        regions_j = (
            StrategyRegion(0.0, iv.a1_lo, "zero"),
            race(iv.a1_lo, iv.a1_hi),
            StrategyRegion(iv.a1_hi, math.inf, "zero"),
        )
    elif z0 < iv.a1_hi:
        regions_i = regions_j = (
            StrategyRegion(0.0, iv.a1_lo, "zero"),
            race(iv.a1_lo, iv.a1_hi),
            StrategyRegion(iv.a1_hi, math.inf, "zero"),
        )
    elif z0 < iv.a2_lo:
        regions_i = (
            StrategyRegion(0.0, iv.a1_hi, "zero"),
            StrategyRegion(
                iv.a1_hi, iv.a2_lo, "indicator",
                _band_pieces(bs.b2, iv.a1_hi, iv.a2_lo, keep_left_edge=True),
            ),
            race(iv.a2_lo, iv.a2_hi),
            StrategyRegion(iv.a2_hi, math.inf, "zero"),
        )
        regions_j = (
            StrategyRegion(0.0, iv.a2_lo, "zero"),
            race(iv.a2_lo, iv.a2_hi),
            StrategyRegion(iv.a2_hi, math.inf, "zero"),
        )
    elif z0 < iv.a2_hi:
        regions_i = regions_j = (
            StrategyRegion(0.0, iv.a2_lo, "zero"),
            race(iv.a2_lo, iv.a2_hi),
            StrategyRegion(iv.a2_hi, math.inf, "zero"),
        )
    else:
        tail_rule = "one" if bs.tail_invest_ok else "zero"
        regions_i = (
            StrategyRegion(0.0, iv.a2_hi, "zero"),
            StrategyRegion(
                iv.a2_hi, bound, "indicator",
                _band_pieces(bs.b3, iv.a2_hi, bound, keep_left_edge=True),
            ),
            StrategyRegion(bound, math.inf, tail_rule),
        )
        return StrategySpec(regions=regions_i), never_invest_spec()

    return StrategySpec(regions=regions_i), StrategySpec(regions=regions_j)


def _resolve_specs(
    profile, values: ValueFunctions, z0: float
) -> tuple[StrategySpec, StrategySpec]:
    if isinstance(profile, EquilibriumProfile):
        return equilibrium_profile_specs(profile, values, z0)
    spec_i, spec_j = profile
    if not (isinstance(spec_i, StrategySpec) and isinstance(spec_j, StrategySpec)):
        raise TypeError("profile must be an EquilibriumProfile or a spec pair")
    return spec_i, spec_j


def w_payoff(
    alpha_i: float,
    alpha_j: float,
    dalpha_i: float,
    dalpha_j: float,
    Lz: float,
    Fz: float,
    Cz: float,
) -> tuple[float, float]:
    """Expected stopping payoffs (firm i, firm j) at the moment the game ends.

    One formula covers every case with a positive intensity: the round
    limit assigns leader, follower and joint outcomes the weights
    alpha_i(1-alpha_j), alpha_j(1-alpha_i) and alpha_i*alpha_j,
    renormalized by the per-round stopping mass.  With both intensities
    zero the right derivatives supply the relative weights instead; if
    those vanish too the stop carries no payoff rule at all.
    """
    for name, a in (("alpha_i", alpha_i), ("alpha_j", alpha_j)):
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {a}")
    mass = alpha_i + alpha_j - alpha_i * alpha_j
    if mass > 0.0:
        w_i = (
            alpha_i * (1.0 - alpha_j) * Lz
            + alpha_j * (1.0 - alpha_i) * Fz
            + alpha_i * alpha_j * Cz
        ) / mass
        w_j = (
            alpha_j * (1.0 - alpha_i) * Lz
            + alpha_i * (1.0 - alpha_j) * Fz
            + alpha_i * alpha_j * Cz
        ) / mass
        return w_i, w_j
    dsum = dalpha_i + dalpha_j
    if dsum <= 0.0:
        raise UndefinedPayoffError(
            "both intensities and both right derivatives vanish at the stop"
        )
    w_i = (dalpha_i * Lz + dalpha_j * Fz) / dsum
    w_j = (dalpha_j * Lz + dalpha_i * Fz) / dsum
    return w_i, w_j


@dataclass(frozen=True)
class GameOutcome:
    """One resolved stop: time, role assignment, and discounted payoffs."""

    tau: float
    roles: str
    w_i: float
    w_j: float


def stop_outcome(
    tau: float,
    alpha_i: float,
    alpha_j: float,
    dalpha_i: float,
    dalpha_j: float,
    Lz: float,
    Fz: float,
    Cz: float,
    rate: float,
) -> GameOutcome:
    """Label and discount the stop reached at time tau with the given weights."""
    w_i, w_j = w_payoff(alpha_i, alpha_j, dalpha_i, dalpha_j, Lz, Fz, Cz)
    if alpha_i == 1.0 and alpha_j == 1.0:
        roles = "simultaneous"
    elif alpha_i > 0.0 and alpha_j == 0.0:
        roles = "i_leads"
    elif alpha_j > 0.0 and alpha_i == 0.0:
        roles = "j_leads"
    elif alpha_i == 0.0 and alpha_j == 0.0:
        if dalpha_i > 0.0 and dalpha_j == 0.0:
            roles = "i_leads"
        elif dalpha_j > 0.0 and dalpha_i == 0.0:
            roles = "j_leads"
        else:
            roles = "coin_flip_mix"
    else:
        roles = "coin_flip_mix"
    disc = math.exp(-rate * tau)
    return GameOutcome(tau=tau, roles=roles, w_i=disc * w_i, w_j=disc * w_j)


@dataclass(frozen=True)
class SubgameValues:
    """Estimated subgame values for both firms, with the stop geometry used."""

    v_i: MCResult
    v_j: MCResult
    cell: tuple[float | None, float | None]
    immediate: bool
    warnings: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "v_i": self.v_i.to_json(),
            "v_j": self.v_j.to_json(),
            "cell": [self.cell[0], self.cell[1]],
            "immediate": self.immediate,
            "warnings": list(self.warnings),
        }


def _walls_around(
    z0: float, pieces: Sequence[tuple[float, float]]
) -> tuple[float | None, float | None]:
    w_lo = max((hi for lo, hi in pieces if hi < z0), default=None)
    w_up = min((lo for lo, hi in pieces if lo > z0), default=None)
    return w_lo, w_up


def _scaled(res: MCResult, scale: float) -> MCResult:
    if scale == 1.0:
        return res
    return MCResult(
        estimate=scale * res.estimate,
        stderr=scale * res.stderr,
        n_paths=res.n_paths,
        cap_fraction=res.cap_fraction,
        abandoned_fraction=res.abandoned_fraction,
    )


def simulate_subgame(
    z0: float,
    t0: float,
    profile,
    config: SimConfig,
    values: ValueFunctions,
) -> SubgameValues:
    """Estimate both firms' values of the subgame starting at (t0, z0).

    ``profile`` is an EquilibriumProfile (resolved to the subgame's pair
    of strategies) or an explicit (spec_i, spec_j) pair.  The stop is
    the first entry into the closure of either firm's investment set.
    The demand cell around z0 has at most two exit walls, so each value
    is a two-barrier stopped expectation; walls are settled with
    Brownian-bridge absorption and both firms are priced on the same
    path ensemble.  Discounting is in absolute time, hence the
    e^{-r t0} factor up front.
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    if t0 < 0.0:
        raise ValueError(f"t0 must be nonnegative, got {t0}")
    spec_i, spec_j = _resolve_specs(profile, values, z0)
    market = values.market
    scale = math.exp(-market.r * t0)
    pieces = _merge_pieces(spec_i.active_pieces() + spec_j.active_pieces())

    if not pieces:
        zero = MCResult(0.0, 0.0, config.n_paths, 0.0)
        return SubgameValues(
            v_i=zero,
            v_j=zero,
            cell=(None, None),
            immediate=False,
            warnings=("no firm ever invests; both values are zero",),
        )

    def stop_weights(z: float) -> tuple[float, float, float, float]:
        return (
            spec_i.alpha(z, values),
            spec_j.alpha(z, values),
            spec_i.dalpha(z),
            spec_j.dalpha(z),
        )

    if _point_in(z0, pieces):
        ai, aj, di, dj = stop_weights(z0)
        w_i, w_j = w_payoff(
            ai, aj, di, dj, float(values.L(z0)), float(values.F(z0)), float(values.C(z0))
        )
        return SubgameValues(
            v_i=MCResult(scale * w_i, 0.0, config.n_paths, 0.0),
            v_j=MCResult(scale * w_j, 0.0, config.n_paths, 0.0),
            cell=(z0, z0),
            immediate=True,
            warnings=(),
        )

    w_lo, w_up = _walls_around(z0, pieces)

    def wall_payoffs(w: float) -> tuple[float, float]:
        ai, aj, di, dj = stop_weights(w)
        return w_payoff(
            ai, aj, di, dj, float(values.L(w)), float(values.F(w)), float(values.C(w))
        )

    if w_lo is not None and w_up is not None:
        stop = [(0.0, w_lo), (w_up, math.inf)]
        barriers: tuple[float | None, float | None] = (w_lo, w_up)
        pay_lo, pay_up = wall_payoffs(w_lo), wall_payoffs(w_up)
        mid = math.sqrt(w_lo * w_up)

        def reward(side: int):
            lo_val, up_val = pay_lo[side], pay_up[side]
            return lambda z: np.where(z <= mid, lo_val, up_val)

    elif w_up is not None:
        stop = [(w_up, math.inf)]
        barriers = (None, w_up)
        pay_up = wall_payoffs(w_up)

        def reward(side: int):
            val = pay_up[side]
            return lambda z: np.full_like(np.asarray(z, dtype=float), val)

    else:
        stop = [(0.0, w_lo)]
        barriers = (w_lo, None)
        pay_lo = wall_payoffs(w_lo)

        def reward(side: int):
            val = pay_lo[side]
            return lambda z: np.full_like(np.asarray(z, dtype=float), val)

    res_i = mc_policy_value(z0, stop, reward(0), config, market, bridge_barriers=barriers)
    res_j = mc_policy_value(z0, stop, reward(1), config, market, bridge_barriers=barriers)
    warnings = []
    if res_i.cap_fraction > 0.01:
        warnings.append(
            f"horizon cap fraction {res_i.cap_fraction:.3f} exceeds 1%; "
            "estimates understate the never-stopped tail"
        )
    return SubgameValues(
        v_i=_scaled(res_i, scale),
        v_j=_scaled(res_j, scale),
        cell=(w_lo, w_up),
        immediate=False,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class DeviationCandidate:
    """One threshold strategy's value against the fixed opponent."""

    threshold: float
    value: float
    stderr: float
    improvement: float
    improvement_se: float
    immediate: bool


@dataclass(frozen=True)
class DeviationReport:
    """Best unilateral threshold deviation found for one firm at one start."""

    firm: str
    z0: float
    baseline: float
    baseline_se: float
    candidates: tuple[DeviationCandidate, ...]
    max_improvement: float
    max_improvement_se: float
    best_threshold: float
    cap_fraction: float

    def to_json(self) -> dict:
        return {
            "firm": self.firm,
            "z0": self.z0,
            "baseline": self.baseline,
            "baseline_se": self.baseline_se,
            "max_improvement": self.max_improvement,
            "max_improvement_se": self.max_improvement_se,
            "best_threshold": self.best_threshold,
            "cap_fraction": self.cap_fraction,
            "candidates": [
                {
                    "threshold": c.threshold,
                    "value": c.value,
                    "stderr": c.stderr,
                    "improvement": c.improvement,
                    "improvement_se": c.improvement_se,
                    "immediate": c.immediate,
                }
                for c in self.candidates
            ],
        }


def default_threshold_family(
    values: ValueFunctions, z0: float, n: int = 50
) -> np.ndarray:
    """Geometric grid of candidate thresholds bracketing z0 and the far window."""
    z3 = values.follower_low.z3
    lo = 0.9 * z0
    hi = max(3.0 * z0, 1.5 * z3)
    return np.geomspace(lo, hi, n)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.shape[0]
    m = float(x.mean())
    if n < 2:
        return m, 0.0
    return m, float(x.std(ddof=1) / math.sqrt(n))


def deviation_test(
    profile,
    firm: str,
    family: Sequence[float],
    z0: float,
    config: SimConfig,
    values: ValueFunctions,
) -> DeviationReport:
    """Best-response check: can ``firm`` gain by a threshold strategy?

    The opponent keeps playing the profile.  Its investment closure
    defines absorbing walls around z0 where the deviator collects the
    follower split; past the second racing band the opponent has no
    walls at all and the deviator simply waits out its own threshold.
    All candidate thresholds and the deviator's own profile stops are
    priced on a single level-ladder ensemble; improvements are per-path
    differences against that baseline, so a candidate that mimics the
    profile reports an improvement of exactly zero.
    """
    if firm not in ("i", "j"):
        raise ValueError(f"firm must be 'i' or 'j', got {firm!r}")
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    spec_i, spec_j = _resolve_specs(profile, values, z0)
    dev_spec, opp_spec = (spec_i, spec_j) if firm == "i" else (spec_j, spec_i)
    fam = np.asarray(sorted({float(b) for b in family}), dtype=float)
    if fam.size == 0 or np.any(fam <= 0.0):
        raise ValueError("family must be a nonempty set of positive thresholds")

    market = values.market
    opp_pieces = opp_spec.active_pieces()
    own_pieces = dev_spec.active_pieces()

    def dev_first(a_dev: float, a_opp: float, d_dev: float, d_opp: float, w: float):
        return w_payoff(
            a_dev, a_opp, d_dev, d_opp,
            float(values.L(w)), float(values.F(w)), float(values.C(w)),
        )[0]

    a_opp0 = opp_spec.alpha(z0, values)
    d_opp0 = opp_spec.dalpha(z0)

    if _point_in(z0, opp_pieces):
        # the opponent acts at once, so every candidate resolves at time zero
        base = dev_first(
            dev_spec.alpha(z0, values), a_opp0, dev_spec.dalpha(z0), d_opp0, z0
        )
        cands = []
        for b in fam:
            v = dev_first(1.0 if b <= z0 else 0.0, a_opp0, 0.0, d_opp0, z0)
            cands.append(
                DeviationCandidate(float(b), v, 0.0, v - base, 0.0, bool(b <= z0))
            )
        return _finish_report(firm, z0, base, 0.0, cands, 0.0)

    w_lo, w_up = _walls_around(z0, opp_pieces)

    base_exact: float | None = None
    o_lo: float | None = None
    o_up: float | None = None
    if _point_in(z0, own_pieces):
        base_exact = dev_first(
            dev_spec.alpha(z0, values), 0.0, dev_spec.dalpha(z0), d_opp0, z0
        )
    else:
        o_lo, o_up = _walls_around(z0, own_pieces)
        if w_lo is not None and o_lo is not None and o_lo <= w_lo:
            o_lo = None
        if w_up is not None and o_up is not None and o_up >= w_up:
            o_up = None

    immediate_mask = fam <= z0
    inner_mask = (fam > z0) if w_up is None else ((fam > z0) & (fam <= w_up))
    beyond_mask = ~immediate_mask & ~inner_mask

    ladder = sorted(
        {float(b) for b in fam[inner_mask]}
        | {w for w in (w_lo, w_up, o_lo, o_up) if w is not None}
    )

    if not ladder:
        # nothing to wait for on either side: the opponent never moves and
        # every non-immediate candidate is out of reach
        base = 0.0 if base_exact is None else base_exact
        cands = []
        for b, imm in zip(fam, immediate_mask):
            v = dev_first(1.0, 0.0, 0.0, 0.0, z0) if imm else 0.0
            cands.append(
                DeviationCandidate(float(b), v, 0.0, v - base, 0.0, bool(imm))
            )
        return _finish_report(firm, z0, base, 0.0, cands, 0.0)

    kernel = mc_level_discounts(
        z0, ladder, config, market, absorb_lower=w_lo, absorb_upper=w_up
    )
    col = {lv: k for k, lv in enumerate(kernel.levels)}
    D = kernel.discounts

    def column(level: float | None) -> np.ndarray | None:
        return None if level is None else D[:, col[level]].astype(np.float64)

    d_wlo, d_wup = column(w_lo), column(w_up)

    # deviator waits at an opponent wall: exercised zero-zero rule at
    # racing edges, plain follower split at outright-investment walls
    pay_wait_lo = (
        0.0 if w_lo is None
        else dev_first(0.0, opp_spec.alpha(w_lo, values), 0.0, opp_spec.dalpha(w_lo), w_lo)
    )
    pay_wait_up = (
        0.0 if w_up is None
        else dev_first(0.0, opp_spec.alpha(w_up, values), 0.0, opp_spec.dalpha(w_up), w_up)
    )

    wall_path = np.zeros(config.n_paths, dtype=np.float64)
    if d_wlo is not None:
        wall_path += d_wlo * pay_wait_lo
    if d_wup is not None:
        wall_path += d_wup * pay_wait_up

    if base_exact is not None:
        base_path = None
        base, base_se = base_exact, 0.0
    else:
        events = []
        for w, d in ((o_lo, column(o_lo)), (o_up, column(o_up))):
            if w is not None:
                pay = dev_first(
                    dev_spec.alpha(w, values),
                    opp_spec.alpha(w, values),
                    dev_spec.dalpha(w),
                    opp_spec.dalpha(w),
                    w,
                )
                events.append((d, pay))
        if d_wlo is not None:
            events.append((
                d_wlo,
                dev_first(
                    dev_spec.alpha(w_lo, values), opp_spec.alpha(w_lo, values),
                    dev_spec.dalpha(w_lo), opp_spec.dalpha(w_lo), w_lo,
                ),
            ))
        if d_wup is not None:
            events.append((
                d_wup,
                dev_first(
                    dev_spec.alpha(w_up, values), opp_spec.alpha(w_up, values),
                    dev_spec.dalpha(w_up), opp_spec.dalpha(w_up), w_up,
                ),
            ))
        # the earliest recorded event has the largest discount factor;
        # exact ties resolve to the first-listed, which is the nearer level
        base_path = np.zeros(config.n_paths, dtype=np.float64)
        best_disc = np.zeros(config.n_paths, dtype=np.float64)
        for d, pay in events:
            take = d > best_disc
            base_path[take] = d[take] * pay
            np.maximum(best_disc, d, out=best_disc)
        base, base_se = _mean_se(base_path)

    pay_now = dev_first(1.0, a_opp0, 0.0, d_opp0, z0)
    cands = []
    for b, imm, inner in zip(fam, immediate_mask, inner_mask):
        b = float(b)
        if imm:
            if base_path is None:
                cands.append(DeviationCandidate(b, pay_now, 0.0, pay_now - base, 0.0, True))
            else:
                diff = pay_now - base_path
                imp, imp_se = _mean_se(diff)
                cands.append(DeviationCandidate(b, pay_now, 0.0, imp, imp_se, True))
            continue
        if inner:
            d_b = column(b)
            if w_up is not None and b == w_up:
                # threshold sitting exactly on the opponent's wall: both
                # weights load at the same instant
                pay_tie = dev_first(
                    1.0, opp_spec.alpha(b, values), 0.0, opp_spec.dalpha(b), b
                )
                cand_path = d_b * pay_tie
                if d_wlo is not None:
                    cand_path = cand_path + d_wlo * pay_wait_lo
            else:
                pay_b = dev_first(1.0, 0.0, 0.0, 0.0, b)
                cand_path = np.where(d_b > 0.0, d_b * pay_b, wall_path)
        else:
            cand_path = wall_path
        v, v_se = _mean_se(cand_path)
        if base_path is None:
            imp, imp_se = v - base, v_se
        else:
            imp, imp_se = _mean_se(cand_path - base_path)
        cands.append(DeviationCandidate(b, v, v_se, imp, imp_se, False))

    return _finish_report(firm, z0, base, base_se, cands, kernel.cap_fraction)


def _finish_report(
    firm: str,
    z0: float,
    base: float,
    base_se: float,
    cands: list[DeviationCandidate],
    cap: float,
) -> DeviationReport:
    best = max(cands, key=lambda c: c.improvement)
    return DeviationReport(
        firm=firm,
        z0=z0,
        baseline=base,
        baseline_se=base_se,
        candidates=tuple(cands),
        max_improvement=best.improvement,
        max_improvement_se=best.improvement_se,
        best_threshold=best.threshold,
        cap_fraction=cap,
    )


@dataclass(frozen=True)
class CounterexampleReport:
    """Numerical evidence that no symmetric profile survives deviations."""

    found: bool
    z0: float | None
    sup_leader: float
    classes: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "found": self.found,
            "z0": self.z0,
            "sup_leader": self.sup_leader,
            "classes": list(self.classes),
        }


def _sup_leader_below(values: ValueFunctions, z_hi: float) -> float:
    """Supremum of the leader curve over (0, z_hi], grid plus local refinement."""
    zs = np.geomspace(values.follower_high.z_h / 20.0, z_hi, 8192)
    vals = np.asarray(values.L(zs), dtype=float)
    best = float(vals.max())
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    for i in interior:
        res = minimize_scalar(
            lambda z: -float(values.L(z)),
            bounds=(zs[i - 1], zs[i + 1]),
            method="bounded",
        )
        best = max(best, -float(res.fun))
    return best


def symmetric_counterexample(
    z0: float | None,
    values: ValueFunctions,
    config: SimConfig,
    *,
    search_bound_factor: float = 50.0,
) -> CounterexampleReport:
    """Exhibit a profitable deviation against each symmetric candidate class.

    Needs a start where the joint-investment value dominates every leader
    value reachable up to the second racing interval; from there, a
    symmetric profile that never stops is beaten by investing at once, and
    any symmetric profile that does stop is beaten either by holding back
    (when following is better at the stop) or again by investing at once.
    Pass z0=None to scan for a qualifying start above the racing zone.
    """
    iv = preemption_intervals(values)
    sup_l = _sup_leader_below(values, iv.a2_hi)
    if z0 is None:
        bound = search_bound_factor * iv.a2_hi
        zs = np.geomspace(iv.a2_hi * (1.0 + 1e-9), bound, 4096)
        above = np.asarray(values.C(zs), dtype=float) > sup_l
        if not above.any():
            return CounterexampleReport(
                found=False, z0=None, sup_leader=sup_l, classes=()
            )
        z0 = float(zs[int(np.argmax(above))]) * 1.05
    if not float(values.C(z0)) > sup_l:
        raise ValueError(
            f"joint value at z0={z0} does not dominate the leader cap {sup_l}"
        )

    market = values.market
    roots = values.roots
    L0, C0 = float(values.L(z0)), float(values.C(z0))

    classes: list[dict] = []

    classes.append({
        "name": "never_invest",
        "candidate": "both intensities zero forever",
        "candidate_value": 0.0,
        "candidate_se": 0.0,
        "deviation": "invest at once and lead",
        "deviation_value": L0,
        "deviation_se": 0.0,
        "gain": L0,
        "gain_se": 0.0,
        "exact": True,
    })

    # joint stop where following beats leading: stop level between the
    # racing intervals, where F > L by construction
    z_star = math.sqrt(iv.a1_hi * iv.a2_lo)
    f_s, c_s = float(values.F(z_star)), float(values.C(z_star))
    d2 = mc_hit_discount(z0, z_star, config, market)
    classes.append({
        "name": "joint_stop_follower_better",
        "candidate": f"both invest at first hit of {z_star:.6g}",
        "stop_level": z_star,
        "candidate_value": d2.estimate * c_s,
        "candidate_se": d2.stderr * c_s,
        "deviation": "hold back and take the follower value at the stop",
        "deviation_value": d2.estimate * f_s,
        "deviation_se": d2.stderr * f_s,
        "gain": d2.estimate * (f_s - c_s),
        "gain_se": d2.stderr * (f_s - c_s),
        "mc_discount": d2.estimate,
        "closed_form_discount": float(discount_at_hit(z0, z_star, roots)),
        "cap_fraction": d2.cap_fraction,
        "exact": False,
    })

    # joint stop inside the second racing interval, where leading is
    # weakly better: investing immediately at z0 dominates
    z_star3 = math.sqrt(iv.a2_lo * iv.a2_hi)
    if float(values.F(z_star3)) > float(values.L(z_star3)):
        raise ValueError(
            f"expected a stop level with leader >= follower, got z={z_star3}"
        )
    c_s3 = float(values.C(z_star3))
    d3 = mc_hit_discount(z0, z_star3, config, market)
    classes.append({
        "name": "joint_stop_leader_better",
        "candidate": f"both invest at first hit of {z_star3:.6g}",
        "stop_level": z_star3,
        "candidate_value": d3.estimate * c_s3,
        "candidate_se": d3.stderr * c_s3,
        "deviation": "invest at once while the rival still waits",
        "deviation_value": L0,
        "deviation_se": 0.0,
        "gain": L0 - d3.estimate * c_s3,
        "gain_se": d3.stderr * c_s3,
        "mc_discount": d3.estimate,
        "closed_form_discount": float(discount_at_hit(z0, z_star3, roots)),
        "cap_fraction": d3.cap_fraction,
        "joint_value_bound": C0,
        "exact": False,
    })

    return CounterexampleReport(
        found=True, z0=z0, sup_leader=sup_l, classes=tuple(classes)
    )
