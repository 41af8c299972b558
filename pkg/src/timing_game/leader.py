"""Leader value functions: monopoly benefit until the follower moves in.

The first investor collects an extra flow xi*Z on top of its own profit
flow for as long as it stands alone.  How long that lasts is set by the
follower's policy, so each leader value is assembled from the matching
follower solution: a one-sided passage discount where the follower has a
single entry threshold, a two-sided exit decomposition where the follower
sits out an inner window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .follower import FollowerHighSolution, FollowerLowSolution, FollowerRegime
from .params import (
    CharRoots,
    EconParams,
    MarketParams,
    PiecewiseValue,
    char_roots,
)

__all__ = [
    "LeaderSolution",
    "leader_solution",
    "leader_low",
    "leader_high",
    "leader_value",
    "monopoly_term",
    "exit_discount_coeffs",
]


@dataclass(frozen=True)
class LeaderSolution:
    """Leader values per outcome plus their probability mix."""

    low_value: PiecewiseValue
    high_value: PiecewiseValue
    combined: PiecewiseValue
    follower_low: FollowerLowSolution
    follower_high: FollowerHighSolution


def exit_discount_coeffs(
    z_lo: float, z_hi: float, roots: CharRoots
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Power-basis coefficients of the two exit discounts on (z_lo, z_hi).

    Each discount E[e^{-r tau} ; exit through one end] solves the pricing
    ODE on the band, so it is p*z^gamma + q*z^beta with boundary values
    (1, 0) for the lower exit and (0, 1) for the upper.  Returns
    ((p_lower, q_lower), (p_upper, q_upper)).
    """
    g, b = roots.gamma, roots.beta
    mat = np.array([[z_lo**g, z_lo**b], [z_hi**g, z_hi**b]])
    lo = np.linalg.solve(mat, np.array([1.0, 0.0]))
    up = np.linalg.solve(mat, np.array([0.0, 1.0]))
    return (float(lo[0]), float(lo[1])), (float(up[0]), float(up[1]))


def monopoly_term(
    z,
    z_lo: float,
    z_hi: float,
    market: MarketParams,
    econ: EconParams,
    roots: CharRoots,
):
    """Expected discounted monopoly flow xi*Z until demand leaves (z_lo, z_hi).

    Decomposes the stopped perpetuity: the flow is worth xi*z/(r-alpha)
    outright, minus what the exit state is worth at each boundary weighted
    by its exit discount.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any((z_arr < z_lo) | (z_arr > z_hi)):
        raise ValueError(f"demand outside the waiting band ({z_lo}, {z_hi})")
    (p_lo, q_lo), (p_up, q_up) = exit_discount_coeffs(z_lo, z_hi, roots)
    g, b = roots.gamma, roots.beta
    scale = econ.xi / (market.r - market.alpha)
    out = scale * (
        z_arr
        - z_lo * (p_lo * z_arr**g + q_lo * z_arr**b)
        - z_hi * (p_up * z_arr**g + q_up * z_arr**b)
    )
    return out if out.ndim else float(out)


def _sole_investor_segment(
    slope: float, entry: float, market: MarketParams, econ: EconParams, g: float
) -> tuple[float, float, float, float]:
    # flow slope*z plus monopoly xi*z/(r-a)*(1 - (z/entry)^(g-1)), cost paid
    m = econ.xi / (market.r - market.alpha)
    return (-m / entry ** (g - 1.0), 0.0, slope + m, -econ.inv_cost)


@lru_cache(maxsize=64)
def _low_piecewise(
    fol: FollowerLowSolution, market: MarketParams, econ: EconParams
) -> PiecewiseValue:
    roots = char_roots(market)
    g, b = roots.gamma, roots.beta
    a1 = econ.pi_low / (market.r - market.alpha)
    settled = (0.0, 0.0, a1, -econ.inv_cost)

    if fol.regime is FollowerRegime.ALWAYS_INNOVATE:
        below = _sole_investor_segment(a1, fol.z3, market, econ, g)
        return PiecewiseValue((fol.z3,), (below, settled), g, b)

    below = _sole_investor_segment(a1, fol.z1, market, econ, g)
    (p_lo, q_lo), (p_up, q_up) = exit_discount_coeffs(fol.z2, fol.z3, roots)
    m = econ.xi / (market.r - market.alpha)
    window = (
        -m * (fol.z2 * p_lo + fol.z3 * p_up),
        -m * (fol.z2 * q_lo + fol.z3 * q_up),
        a1 + m,
        -econ.inv_cost,
    )
    return PiecewiseValue(
        (fol.z1, fol.z2, fol.z3), (below, settled, window, settled), g, b
    )


@lru_cache(maxsize=64)
def _high_piecewise(
    fol: FollowerHighSolution, market: MarketParams, econ: EconParams
) -> PiecewiseValue:
    roots = char_roots(market)
    a_h = econ.pi_high / (market.r - market.alpha)
    below = _sole_investor_segment(a_h, fol.z_h, market, econ, roots.gamma)
    settled = (0.0, 0.0, a_h, -econ.inv_cost)
    return PiecewiseValue((fol.z_h,), (below, settled), roots.gamma, roots.beta)


def leader_low(z, follower_low: FollowerLowSolution, market: MarketParams, econ: EconParams):
    """Leader value in the low-profit outcome, follower playing optimally."""
    return _low_piecewise(follower_low, market, econ)(z)


def leader_high(z, follower_high: FollowerHighSolution, market: MarketParams, econ: EconParams):
    """Leader value in the high-profit outcome, follower playing optimally."""
    return _high_piecewise(follower_high, market, econ)(z)


def _mix_piecewise(
    high: PiecewiseValue, low: PiecewiseValue, p_high: float
) -> PiecewiseValue:
    breaks = tuple(sorted(set(high.breakpoints) | set(low.breakpoints)))
    segments = []
    for i in range(len(breaks) + 1):
        if i == 0:
            probe = 0.5 * breaks[0]
        elif i == len(breaks):
            probe = 2.0 * breaks[-1]
        else:
            probe = (breaks[i - 1] * breaks[i]) ** 0.5
        hi_seg = high.segments[high.segment_index(probe)]
        lo_seg = low.segments[low.segment_index(probe)]
        segments.append(
            tuple(p_high * h + (1.0 - p_high) * l for h, l in zip(hi_seg, lo_seg))
        )
    return PiecewiseValue(breaks, tuple(segments), high.gamma, high.beta)


def leader_solution(
    market: MarketParams,
    econ: EconParams,
    follower_low: FollowerLowSolution,
    follower_high: FollowerHighSolution,
) -> LeaderSolution:
    """Assemble both outcome values and their ex ante combination."""
    low = _low_piecewise(follower_low, market, econ)
    high = _high_piecewise(follower_high, market, econ)
    combined = _mix_piecewise(high, low, econ.p_high)
    return LeaderSolution(
        low_value=low,
        high_value=high,
        combined=combined,
        follower_low=follower_low,
        follower_high=follower_high,
    )


def leader_value(z, sols: LeaderSolution, econ: EconParams):
    """Ex ante leader payoff: outcome-probability mix of the two values."""
    return sols.combined(z)
