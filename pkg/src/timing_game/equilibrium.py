"""Preemption intervals, no-deviation sets, and the equilibrium profile.

With both value curves in hand, the strategic layer reduces to geometry:
where the leader payoff L lies above the follower payoff F, firms race
and mix with the indifference ratio (L-F)/(L-C); elsewhere a firm invests
outright only where L(y) beats every "wait for demand to reach z, then
lead" alternative, discounted by the first-passage factor d(y, z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import GeometryError, RegimeError, ScenarioShapeError
from .follower import (
    FollowerHighSolution,
    FollowerLowSolution,
    FollowerRegime,
    solve_high,
    solve_low,
)
from .leader import LeaderSolution, leader_solution
from .params import (
    CharRoots,
    EconParams,
    MarketParams,
    char_roots,
    cournot_value,
)

__all__ = [
    "ValueFunctions",
    "ScenarioReport",
    "PreemptionIntervals",
    "BSets",
    "EquilibriumProfile",
    "build_value_functions",
    "check_scenario",
    "find_intervals",
    "preemption_intervals",
    "alpha_at",
    "compute_b_sets",
    "build_profile",
    "alpha_profile",
    "classify_demand",
    "intervals_report",
    "bsets_report",
    "vacuum_classification",
]

_REL_TOL = 1e-10


@dataclass(frozen=True)
class ValueFunctions:
    """Solved model bundle exposing the three ex ante value curves."""

    market: MarketParams
    econ: EconParams
    follower_low: FollowerLowSolution
    follower_high: FollowerHighSolution
    leader: LeaderSolution

    def F(self, z):
        p = self.econ.p_high
        return p * self.follower_high.value(z) + (1.0 - p) * self.follower_low.value(z)

    def L(self, z):
        return self.leader.combined(z)

    def C(self, z):
        return cournot_value(z, self.market, self.econ)

    @property
    def roots(self) -> CharRoots:
        return char_roots(self.market)


def build_value_functions(market: MarketParams, econ: EconParams) -> ValueFunctions:
    """Solve follower and leader problems and bundle the value curves."""
    low = solve_low(market, econ)
    high = solve_high(market, econ)
    lead = leader_solution(market, econ, low, high)
    return ValueFunctions(
        market=market,
        econ=econ,
        follower_low=low,
        follower_high=high,
        leader=lead,
    )


@dataclass(frozen=True)
class ScenarioReport:
    """Outcome of the two-crossing scenario check, with witnesses."""

    ok: bool
    below_witness: float | None
    below_gap: float
    window_witness: float | None
    window_gap: float


def check_scenario(values: ValueFunctions, grid_n: int = 2048) -> ScenarioReport:
    """Test whether L rises above F both below z1 and inside (z2, z3).

    Both conditions together produce the two-racing-intervals shape this
    package's equilibrium construction targets; they hold once the sole-
    investor benefit rate xi is large enough.
    """
    fol = values.follower_low
    if fol.regime is not FollowerRegime.INNER_WAIT:
        raise RegimeError(
            "scenario requires the inner-window follower regime, got "
            f"{fol.regime.value}"
        )

    def best(zl: float, zr: float) -> tuple[float, float]:
        zs = np.geomspace(zl, zr, grid_n)
        gap = values.L(zs) - values.F(zs)
        i = int(np.argmax(gap))
        return float(zs[i]), float(gap[i])

    below_z, below_gap = best(fol.z1 * 1e-3, fol.z1 * (1.0 - 1e-9))
    win_z, win_gap = best(fol.z2 * (1.0 + 1e-9), fol.z3 * (1.0 - 1e-9))
    return ScenarioReport(
        ok=below_gap > 0.0 and win_gap > 0.0,
        below_witness=below_z if below_gap > 0.0 else None,
        below_gap=below_gap,
        window_witness=win_z if win_gap > 0.0 else None,
        window_gap=win_gap,
    )


@dataclass(frozen=True)
class PreemptionIntervals:
    """The two demand intervals where leading beats following."""

    a1_lo: float
    a1_hi: float
    a2_lo: float
    a2_hi: float

    def in_first(self, z):
        return (z >= self.a1_lo) & (z <= self.a1_hi)

    def in_second(self, z):
        return (z >= self.a2_lo) & (z <= self.a2_hi)


def _bisect_root(g, lo: float, hi: float) -> float:
    # g(lo) and g(hi) straddle zero; machine-accurate endpoints matter
    # because the intensity ratio at an interval edge must clamp to zero
    return float(brentq(g, lo, hi, xtol=1e-30, rtol=4.0 * np.finfo(float).eps))


def find_intervals(
    L,
    F,
    z_max_search: float,
    *,
    z_min_search: float,
    grid_n: int = 4096,
) -> PreemptionIntervals:
    """Locate the maximal intervals with L >= F by sign scan plus bisection.

    Exactly two intervals are the expected shape; anything else raises
    with the crossing locations attached for diagnosis.
    """
    zs = np.geomspace(z_min_search, z_max_search, grid_n)
    gap = np.asarray(L(zs)) - np.asarray(F(zs))
    pos = gap >= 0.0

    def g(z: float) -> float:
        return float(L(z) - F(z))

    runs: list[tuple[float, float]] = []
    i = 0
    while i < grid_n:
        if pos[i]:
            j = i
            while j + 1 < grid_n and pos[j + 1]:
                j += 1
            lo = _bisect_root(g, zs[i - 1], zs[i]) if i > 0 else zs[0]
            hi = _bisect_root(g, zs[j + 1], zs[j]) if j + 1 < grid_n else zs[-1]
            runs.append((lo, hi))
            i = j + 1
        else:
            i += 1

    if len(runs) != 2 or pos[0] or pos[-1]:
        raise ScenarioShapeError(
            f"expected exactly two interior intervals with L >= F, found {len(runs)}",
            grid=[[lo, hi] for lo, hi in runs],
            gap=float(np.max(gap)),
        )
    (a1_lo, a1_hi), (a2_lo, a2_hi) = runs
    return PreemptionIntervals(a1_lo=a1_lo, a1_hi=a1_hi, a2_lo=a2_lo, a2_hi=a2_hi)


def preemption_intervals(
    values: ValueFunctions, z_max_search: float | None = None, grid_n: int = 4096
) -> PreemptionIntervals:
    """find_intervals with default search range from the solved thresholds.

    Above z3 the gap F - L grows linearly (the follower keeps its copy
    discount and outcome option while both values share slope), so the
    search never needs to extend past z3 by much.
    """
    fol = values.follower_low
    z_max = 1.5 * fol.z3 if z_max_search is None else z_max_search
    return find_intervals(
        values.L,
        values.F,
        z_max,
        z_min_search=values.follower_high.z_h / 10.0,
        grid_n=grid_n,
    )


def alpha_at(z, L, F, C):
    """Preemption intensity (L-F)/(L-C) at demand inside a racing interval.

    Clamps only roundoff-sized excursions outside [0, 1]; anything larger
    means the interval geometry is broken and raises.
    """
    z_arr = np.asarray(z, dtype=float)
    Lz = np.asarray(L(z_arr), dtype=float)
    Fz = np.asarray(F(z_arr), dtype=float)
    Cz = np.asarray(C(z_arr), dtype=float)
    denom = Lz - Cz
    if np.any(denom <= 0.0):
        bad = z_arr[denom <= 0.0]
        raise GeometryError(
            f"leader value does not exceed the joint-investment value at z={bad.flat[0]}"
        )
    ratio = (Lz - Fz) / denom
    slack = 1e-12 * np.maximum(1.0, np.abs(ratio))
    if np.any(ratio < -slack) or np.any(ratio > 1.0 + slack):
        bad = z_arr[(ratio < -slack) | (ratio > 1.0 + slack)]
        raise GeometryError(
            f"preemption ratio outside [0,1] by more than roundoff at z={bad.flat[0]}"
        )
    out = np.clip(ratio, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BSets:
    """Outright-investment sets per waiting region, as interval unions.

    b3 is computed on [a2_hi, z_max_bound); ``tail_invest_ok`` records the
    analytic check that past the bound, where L is affine, the defining
    inequality holds for every y (the discounted alternative is maximized
    at a finite demand level the bound covers).
    """

    b1: tuple[tuple[float, float], ...]
    b2: tuple[tuple[float, float], ...]
    b3: tuple[tuple[float, float], ...]
    z_max_bound: float
    tail_invest_ok: bool


def _refined_candidates(L, zs: np.ndarray, expo: float):
    """Values of L(z)*z^expo on the grid plus golden-refined local maxima."""

    def psi(z):
        return np.asarray(L(z)) * np.asarray(z) ** expo

    vals = psi(zs)
    extra_z = []
    interior = np.flatnonzero(
        (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
    )
    for i in interior + 1:
        res = minimize_scalar(
            lambda z: -float(psi(z)),
            bounds=(zs[i - 1], zs[i + 1]),
            method="bounded",
            options={"xatol": 1e-13 * zs[i]},
        )
        extra_z.append(float(res.x))
    if extra_z:
        all_z = np.concatenate([zs, np.array(extra_z)])
        order = np.argsort(all_z)
        all_z = all_z[order]
        all_v = np.concatenate([vals, psi(np.array(extra_z))])[order]
        return all_z, all_v
    return zs, vals


class _RegionSup:
    """sup over z in one region of d(y, z) * L(z), evaluable at any y.

    d(y, z) is (y/z)^gamma for z above y and (y/z)^beta below, so the two
    directional sups reduce to suffix/prefix maxima of L(z)*z^(-gamma) and
    L(z)*z^(-beta) over a refined candidate grid.  ``floor`` adds an
    analytic lower bound on the sup (the z -> 0 tail of the first region
    approaches zero payoff from below, making its sup at least 0).
    """

    def __init__(self, L, z_lo: float, z_hi: float, roots: CharRoots,
                 grid_n: int, floor: float | None):
        self.g, self.b = roots.gamma, roots.beta
        self.floor = floor
        zs = np.geomspace(z_lo, z_hi, grid_n)
        zg, vg = _refined_candidates(L, zs, -self.g)
        zb, vb = _refined_candidates(L, zs, -self.b)
        self.z_gamma = zg
        self.suffix_gamma = np.maximum.accumulate(vg[::-1])[::-1]
        self.z_beta = zb
        self.prefix_beta = np.maximum.accumulate(vb)

    def __call__(self, y: float) -> float:
        out = -np.inf if self.floor is None else self.floor
        i = np.searchsorted(self.z_gamma, y, side="left")
        if i < len(self.z_gamma):
            out = max(out, y**self.g * self.suffix_gamma[i])
        j = np.searchsorted(self.z_beta, y, side="right") - 1
        if j >= 0:
            out = max(out, y**self.b * self.prefix_beta[j])
        return float(out)


def _member_intervals(
    L, sup: _RegionSup, y_lo: float, y_hi: float, grid_n: int, scale: float
) -> tuple[tuple[float, float], ...]:
    ys = np.geomspace(y_lo, y_hi, grid_n)
    tol = 1e-12 * scale

    def member(y: float) -> bool:
        return float(L(y)) >= sup(y) - tol

    flags = np.array([member(y) for y in ys])

    def edge(y_in: float, y_out: float) -> float:
        for _ in range(80):
            mid = (y_in * y_out) ** 0.5
            if member(mid):
                y_in = mid
            else:
                y_out = mid
            if abs(y_out - y_in) <= _REL_TOL * max(y_in, y_out):
                break
        return y_in

    runs = []
    i = 0
    n = len(ys)
    while i < n:
        if flags[i]:
            j = i
            while j + 1 < n and flags[j + 1]:
                j += 1
            lo = edge(ys[i], ys[i - 1]) if i > 0 else ys[0]
            hi = edge(ys[j], ys[j + 1]) if j + 1 < n else ys[-1]
            runs.append((float(lo), float(hi)))
            i = j + 1
        else:
            i += 1
    return tuple(runs)


def compute_b_sets(
    L,
    roots: CharRoots,
    intervals: PreemptionIntervals,
    z_max_bound: float | None = None,
    grid_n: int = 4096,
) -> BSets:
    """Membership sets where investing now beats waiting for any other entry.

    y qualifies when L(y) >= sup over the region's closure of the
    discounted leader payoff at the passage target.  Regions are the three
    waiting zones delimited by the racing intervals; the last one is
    truncated at ``z_max_bound`` (default 10x its left edge).
    """
    bound = 10.0 * intervals.a2_hi if z_max_bound is None else z_max_bound
    scale = float(np.max(np.abs(L(np.geomspace(intervals.a1_lo / 100, bound, 256)))))

    # region 1 reaches down to 0; grid from far below the racing zone and
    # force the sup's analytic z->0 floor of 0
    r1_lo = intervals.a1_lo / 100.0
    sup1 = _RegionSup(L, r1_lo, intervals.a1_lo, roots, grid_n, floor=0.0)
    b1 = _member_intervals(L, sup1, r1_lo, intervals.a1_lo, grid_n, scale)

    sup2 = _RegionSup(L, intervals.a1_hi, intervals.a2_lo, roots, grid_n, floor=None)
    b2 = _member_intervals(
        L, sup2, intervals.a1_hi, intervals.a2_lo * (1.0 - 1e-12), grid_n, scale
    )

    sup3 = _RegionSup(L, intervals.a2_hi, bound, roots, grid_n, floor=None)
    b3 = _member_intervals(
        L, sup3, intervals.a2_hi, bound * (1.0 - 1e-12), grid_n, scale
    )

    # past the bound L is affine a2*z - cost, so (y/z)^gamma * L(z) peaks
    # at z = gamma*cost/((gamma-1)*a2); the truncation is sound iff that
    # peak lies inside the bound for the affine tail coefficients
    zs_probe = np.array([bound * 1.5, bound * 3.0])
    Lp = np.asarray(L(zs_probe))
    slope = (Lp[1] - Lp[0]) / (zs_probe[1] - zs_probe[0])
    intercept = Lp[0] - slope * zs_probe[0]
    g = roots.gamma
    tail_peak = g / (g - 1.0) * (-intercept) / slope if intercept < 0.0 else 0.0
    tail_ok = slope > 0.0 and tail_peak < bound
    return BSets(b1=b1, b2=b2, b3=b3, z_max_bound=bound, tail_invest_ok=bool(tail_ok))


def _in_union(z, intervals: tuple[tuple[float, float], ...]):
    z_arr = np.asarray(z, dtype=float)
    out = np.zeros(z_arr.shape, dtype=bool)
    for lo, hi in intervals:
        out |= (z_arr >= lo) & (z_arr <= hi)
    return out


@dataclass(frozen=True)
class EquilibriumProfile:
    """Region-keyed investment intensities for the asymmetric equilibrium.

    Firm i races with the indifference ratio inside both A-intervals and
    otherwise invests exactly on the no-deviation sets; firm j races with
    the same ratio inside the A-intervals and never invests outside.
    """

    intervals: PreemptionIntervals
    bsets: BSets


def build_profile(intervals: PreemptionIntervals, bsets: BSets) -> EquilibriumProfile:
    return EquilibriumProfile(intervals=intervals, bsets=bsets)


def alpha_profile(z, profile: EquilibriumProfile, values: ValueFunctions):
    """Both firms' investment intensities at demand z (scalar or array)."""
    z_arr = np.asarray(z, dtype=float)
    iv, bs = profile.intervals, profile.bsets
    in_a = iv.in_first(z_arr) | iv.in_second(z_arr)
    ratio = np.zeros(z_arr.shape, dtype=float)
    if np.any(in_a):
        ratio[in_a] = alpha_at(z_arr[in_a], values.L, values.F, values.C)
    in_b = _in_union(z_arr, bs.b1 + bs.b2 + bs.b3)
    if bs.tail_invest_ok:
        in_b |= z_arr >= bs.z_max_bound
    alpha_i = np.where(in_a, ratio, in_b.astype(float))
    alpha_j = np.where(in_a, ratio, 0.0)
    if alpha_i.ndim:
        return alpha_i, alpha_j
    return float(alpha_i), float(alpha_j)


def classify_demand(z: float, profile: EquilibriumProfile) -> str:
    """Name the strategic region demand level z falls into."""
    iv, bs = profile.intervals, profile.bsets
    if iv.a1_lo <= z <= iv.a1_hi:
        return "preempt_A1"
    if iv.a2_lo <= z <= iv.a2_hi:
        return "preempt_A2"
    if z < iv.a1_lo:
        return "invest_B" if bool(_in_union(z, bs.b1)) else "no_invest"
    if z < iv.a2_lo:
        return "invest_B" if bool(_in_union(z, bs.b2)) else "vacuum"
    if bool(_in_union(z, bs.b3)) or (bs.tail_invest_ok and z >= bs.z_max_bound):
        return "invest_B3"
    return "no_invest"


def intervals_report(intervals: PreemptionIntervals) -> dict:
    return {
        "region": "preemption",
        "intervals": [
            [intervals.a1_lo, intervals.a1_hi],
            [intervals.a2_lo, intervals.a2_hi],
        ],
    }


def _complement_within(
    span: tuple[float, float], parts: tuple[tuple[float, float], ...]
) -> list[list[float]]:
    lo, hi = span
    gaps = []
    cursor = lo
    for p_lo, p_hi in sorted(parts):
        if p_lo > cursor + _REL_TOL * hi:
            gaps.append([cursor, min(p_lo, hi)])
        cursor = max(cursor, p_hi)
    if cursor < hi - _REL_TOL * hi:
        gaps.append([cursor, hi])
    return gaps


def bsets_report(bsets: BSets, intervals: PreemptionIntervals) -> dict:
    """JSON record of the three sets plus the vacuum diagnosis.

    A vacuum is any part of the middle waiting zone (a1_hi, a2_lo) that
    B2 fails to cover: demand sits between the racing intervals and no
    firm invests.
    """
    vacuum_parts = _complement_within((intervals.a1_hi, intervals.a2_lo), bsets.b2)
    return {
        "regions": [
            {"region": "B1", "intervals": [list(p) for p in bsets.b1]},
            {"region": "B2", "intervals": [list(p) for p in bsets.b2]},
            {"region": "B3", "intervals": [list(p) for p in bsets.b3]},
        ],
        "z_max_bound": bsets.z_max_bound,
        "tail_invest_ok": bsets.tail_invest_ok,
        "vacuum": len(vacuum_parts) > 0,
        "vacuum_intervals": vacuum_parts,
    }


def vacuum_classification(bsets: BSets, intervals: PreemptionIntervals) -> dict:
    """Investment pattern across the four demand bands up to the second race.

    The headline flags state, band by band, whether equilibrium
    investment can fail to happen there: investment always occurs inside
    the racing intervals, while the low band and the middle band invest
    only on their no-regret pieces.  A vacuum means the middle band has
    demand ranges with no investment even though both neighboring racing
    bands invest, so the overall pattern is invest / wait / invest.
    """
    low_gaps = _complement_within((0.0, intervals.a1_lo), bsets.b1)
    vacuum_parts = _complement_within((intervals.a1_hi, intervals.a2_lo), bsets.b2)

    def coverage(pieces, gaps) -> str:
        if not pieces:
            return "nowhere"
        return "everywhere" if not gaps else "partial"

    return {
        "vacuum": len(vacuum_parts) > 0,
        "no_investment_at_low_demand": len(low_gaps) > 0,
        "investment_in_first_racing_band": True,
        "no_investment_between_racing_bands": len(vacuum_parts) > 0,
        "investment_in_second_racing_band": True,
        "bands": [
            {
                "band": [0.0, intervals.a1_lo],
                "investment": coverage(bsets.b1, low_gaps),
                "invest_intervals": [list(p) for p in bsets.b1],
                "no_invest_intervals": low_gaps,
            },
            {
                "band": [intervals.a1_lo, intervals.a1_hi],
                "investment": "everywhere",
                "mode": "preemption race",
            },
            {
                "band": [intervals.a1_hi, intervals.a2_lo],
                "investment": coverage(bsets.b2, vacuum_parts),
                "invest_intervals": [list(p) for p in bsets.b2],
                "no_invest_intervals": vacuum_parts,
            },
            {
                "band": [intervals.a2_lo, intervals.a2_hi],
                "investment": "everywhere",
                "mode": "preemption race",
            },
        ],
    }
