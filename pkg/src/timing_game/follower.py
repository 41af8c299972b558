"""Follower stopping problem: regimes, thresholds, and value functions.

After one firm has invested, the other chooses when to follow and whether
to copy the revealed technology at discounted cost or buy a fresh draw at
full cost.  In the high-profit outcome a single threshold settles it.  In
the low-profit outcome the copy/buy trade-off can open an inner waiting
window between two investment regions; solving that case means pinning two
free boundaries and two option coefficients from four pasting conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq, root

from .errors import InconsistentParameterError, SolverConvergenceError
from .params import (
    CharRoots,
    DerivedCoeffs,
    EconParams,
    MarketParams,
    PiecewiseValue,
    char_roots,
    derived_coeffs,
)

__all__ = [
    "FollowerRegime",
    "FollowerLowSolution",
    "FollowerHighSolution",
    "classify_regime",
    "solve_low",
    "solve_high",
    "eval_low",
    "eval_high",
    "follower_value",
    "follower_policy",
    "low_solution_summary",
    "high_solution_summary",
]

_TOL = 1e-12
_MAX_ITER = 200


class FollowerRegime(Enum):
    INNER_WAIT = "InnerWait"
    ALWAYS_INNOVATE = "AlwaysInnovate"


@dataclass(frozen=True)
class FollowerHighSolution:
    """Follower value after a high-profit reveal: copy at or above z_h."""

    z_h: float
    value: PiecewiseValue


@dataclass(frozen=True)
class FollowerLowSolution:
    """Follower value after a low-profit reveal.

    InnerWait populates every field: wait below z1, copy on [z1, z2], wait
    again on (z2, z3), buy fresh at or above z3.  AlwaysInnovate collapses
    to a single buy threshold, leaving only z3 and b0_coef set.
    """

    regime: FollowerRegime
    z1: float | None
    z2: float | None
    z3: float
    a0_coef: float | None
    b0_coef: float
    c0_coef: float | None
    value: PiecewiseValue


def classify_regime(market: MarketParams, econ: EconParams) -> FollowerRegime:
    """Decide whether the copy window survives against buying fresh.

    The comparison is (a2/a1)^(gamma/(gamma-1)) against k2/k1: the left
    side measures how much better the fresh draw's slope is, the right how
    much cheaper copying is.  A tie goes to AlwaysInnovate.
    """
    roots = char_roots(market)
    d = derived_coeffs(market, econ)
    g = roots.gamma
    # compare in logs: the raw ratio overflows when gamma is close to 1
    if g / (g - 1.0) * math.log(d.a2 / d.a1) >= math.log(d.k2 / d.k1):
        return FollowerRegime.ALWAYS_INNOVATE
    return FollowerRegime.INNER_WAIT


def _lone_threshold(slope: float, cost: float, g: float) -> tuple[float, float]:
    # single-boundary stopping on reward slope*z - cost
    z_star = g / (g - 1.0) * cost / slope
    coef = cost / ((g - 1.0) * z_star**g)
    return z_star, coef


def solve_high(market: MarketParams, econ: EconParams) -> FollowerHighSolution:
    """Copy threshold and option value for the high-profit outcome."""
    roots = char_roots(market)
    a_h = econ.pi_high / (market.r - market.alpha)
    k1 = (1.0 - econ.theta) * econ.inv_cost
    z_h, coef = _lone_threshold(a_h, k1, roots.gamma)
    value = PiecewiseValue(
        breakpoints=(z_h,),
        segments=((coef, 0.0, 0.0, 0.0), (0.0, 0.0, a_h, -k1)),
        gamma=roots.gamma,
        beta=roots.beta,
    )
    return FollowerHighSolution(z_h=z_h, value=value)


def _tangency_coeffs(z: float, slope: float, cost: float, g: float, b: float):
    # option coefficients (b0, c0) of b0*z^g - c0*z^b forced to match the
    # reward slope*z - cost in value and slope at z; the system determinant
    # (g-b)*z^(g+b-1) never vanishes, so this stays well conditioned even
    # for pinched windows
    b0 = (slope * z * (1.0 - b) + b * cost) * z ** (-g) / (g - b)
    c0 = (slope * z * (1.0 - g) + g * cost) * z ** (-b) / (g - b)
    return b0, c0


def _window_coeffs(z2: float, d: DerivedCoeffs, g: float, b: float):
    return _tangency_coeffs(z2, d.a1, d.k1, g, b)


def _pasting_residuals(
    z2: float, z3: float, d: DerivedCoeffs, g: float, b: float
) -> np.ndarray:
    # with the lower boundary matched exactly, only the upper-boundary
    # value and slope conditions against a2*z - k2 remain
    b0, c0 = _window_coeffs(z2, d, g, b)
    rv = b0 * z3**g - c0 * z3**b - (d.a2 * z3 - d.k2)
    rs = g * b0 * z3 ** (g - 1.0) - b * c0 * z3 ** (b - 1.0) - d.a2
    return np.array([rv / (1.0 + z3), rs])


def _bracketed_window(
    d: DerivedCoeffs, g: float, b: float, z1: float, z_kink: float
) -> tuple[float, float] | None:
    """Nested bracketed bisection for the window boundaries (z2, z3).

    Tangency to each reward line pins both option coefficients in closed
    form, so the four pasting conditions reduce to matching the two
    coefficient pairs across the boundaries.  The beta coefficient of the
    upper tangency is zero at the lone fresh-entry threshold and strictly
    decreasing beyond it, while the lower tangency's beta coefficient is
    strictly negative on (z1, z_kink): the inner solve for z3 given z2 is
    therefore a bracketed root of a monotone function, and the outer gamma
    coefficient mismatch is bisected in z2.  Returns None when the outer
    mismatch does not change sign on the admissible interval.
    """
    z3_lone = g / (g - 1.0) * d.k2 / d.a2

    def c0_upper(z3: float) -> float:
        return _tangency_coeffs(z3, d.a2, d.k2, g, b)[1]

    def z3_for(z2: float) -> float:
        target = _tangency_coeffs(z2, d.a1, d.k1, g, b)[1]
        hi = 2.0 * max(z3_lone, z_kink)
        for _ in range(200):
            if c0_upper(hi) < target:
                break
            hi *= 2.0
        else:
            raise OverflowError("upper tangency bracket did not close")
        # at z3_lone itself c0_upper is an exact cancellation whose float
        # sign is noise (amplified by z^-b), so start the bracket a hair
        # below, where the analytic value is positive by a safe margin
        return brentq(
            lambda z: c0_upper(z) - target,
            z3_lone * (1.0 - 1e-9),
            hi,
            xtol=1e-30,
            rtol=4.0 * np.finfo(float).eps,
            maxiter=300,
        )

    def mismatch(z2: float) -> float:
        b0_low = _tangency_coeffs(z2, d.a1, d.k1, g, b)[0]
        b0_up = _tangency_coeffs(z3_for(z2), d.a2, d.k2, g, b)[0]
        return b0_low - b0_up

    lo = z1 * (1.0 + 1e-12)
    hi = z_kink * (1.0 - 1e-12)
    try:
        if mismatch(lo) * mismatch(hi) > 0.0:
            return None
        z2 = brentq(
            mismatch,
            lo,
            hi,
            xtol=1e-30,
            rtol=4.0 * np.finfo(float).eps,
            maxiter=300,
        )
        return z2, z3_for(z2)
    except (OverflowError, ValueError):
        return None


def _solve_inner_window(
    d: DerivedCoeffs, g: float, b: float, z1: float
) -> tuple[float, float, float, float]:
    """Solve the four smooth-pasting conditions for the inner waiting window.

    The rewards a1*z - k1 and a2*z - k2 cross at z_kink; the wait segment
    must bridge them, so z2 lies in (z1, z_kink) and z3 above z_kink.
    The primary path is the fully bracketed nested bisection in
    _bracketed_window.  If that cannot bracket, a damped Newton iteration
    on the upper-boundary residuals runs from several starts, with scipy's
    hybrid root finder as the last fallback.  The Newton search works in
    coordinates that bake the ordering constraints in: z2 sweeps (z1,
    z_kink) through a sigmoid, z3 covers (z_kink, inf) through an
    exponential offset.
    """
    scale = max(d.a1, d.a2)
    z_kink = (d.k2 - d.k1) / (d.a2 - d.a1)
    if z_kink <= z1:
        raise InconsistentParameterError(
            f"reward crossing {z_kink} at or below the copy threshold {z1}; "
            "no room for an inner waiting window"
        )

    pair = _bracketed_window(d, g, b, z1, z_kink)
    if pair is not None:
        z2, z3 = pair
        res = _pasting_residuals(z2, z3, d, g, b)
        if np.max(np.abs(res)) < _TOL * scale:
            b0, c0 = _window_coeffs(z2, d, g, b)
            return b0, c0, z2, z3

    def unpack(st: np.ndarray) -> tuple[float, float]:
        s = float(np.clip(st[0], -30.0, 30.0))
        t = float(np.clip(st[1], -30.0, 30.0))
        z2 = z1 + (z_kink - z1) / (1.0 + math.exp(-s))
        return z2, z_kink * (1.0 + math.exp(t))

    def resid(st: np.ndarray) -> np.ndarray:
        try:
            return _pasting_residuals(*unpack(st), d, g, b)
        except OverflowError:
            return np.array([1e9, 1e9]) * scale

    def pack_z2(z2: float) -> float:
        frac = min(max((z2 - z1) / (z_kink - z1), 1e-6), 1.0 - 1e-6)
        return math.log(frac / (1.0 - frac))

    z3_guess = max(g / (g - 1.0) * d.k2 / d.a2, 1.05 * z_kink)
    starts = [
        (pack_z2(min(1.5 * z1, (z1 * z_kink) ** 0.5)), math.log(z3_guess / z_kink - 1.0)),
        (pack_z2(0.5 * (z1 + z_kink)), math.log(0.2)),
        (pack_z2(z1 + 0.9 * (z_kink - z1)), math.log(0.02)),
    ]
    if pair is not None:
        # polish the bracketed answer if it fell just short of tolerance
        z2_b, z3_b = pair
        starts.insert(0, (pack_z2(z2_b), math.log(max(z3_b / z_kink - 1.0, 1e-9))))

    best = None
    for s0 in starts:
        st = np.array(s0, dtype=float)
        res = resid(st)
        for _ in range(_MAX_ITER):
            if np.max(np.abs(res)) < _TOL * scale:
                z2, z3 = unpack(st)
                b0, c0 = _window_coeffs(z2, d, g, b)
                return b0, c0, z2, z3
            jac = np.empty((2, 2))
            h = 1e-7
            for col in range(2):
                bump = st.copy()
                bump[col] += h
                jac[:, col] = (resid(bump) - res) / h
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                break
            lam, norm0 = 1.0, float(np.dot(res, res))
            while lam > 1e-10:
                trial = resid(st + lam * step)
                if float(np.dot(trial, trial)) < norm0:
                    st, res = st + lam * step, trial
                    break
                lam *= 0.5
            else:
                break
        if best is None or np.max(np.abs(res)) < best[0]:
            best = (float(np.max(np.abs(res))), st)

        sol = root(resid, x0=st, method="hybr", tol=1e-14)
        res_f = resid(sol.x)
        if np.max(np.abs(res_f)) < _TOL * scale:
            z2, z3 = unpack(sol.x)
            b0, c0 = _window_coeffs(z2, d, g, b)
            return b0, c0, z2, z3

    z2, z3 = unpack(best[1])
    raise SolverConvergenceError(
        "smooth-pasting system for the inner waiting window did not converge: "
        f"best residual {best[0]} at (z2, z3) = ({z2}, {z3})"
    )


def solve_low(market: MarketParams, econ: EconParams) -> FollowerLowSolution:
    """Thresholds and option coefficients for the low-profit outcome."""
    roots = char_roots(market)
    g, b = roots.gamma, roots.beta
    d = derived_coeffs(market, econ)
    regime = classify_regime(market, econ)

    if regime is FollowerRegime.ALWAYS_INNOVATE:
        z3, b0 = _lone_threshold(d.a2, d.k2, g)
        value = PiecewiseValue(
            breakpoints=(z3,),
            segments=((b0, 0.0, 0.0, 0.0), (0.0, 0.0, d.a2, -d.k2)),
            gamma=g,
            beta=b,
        )
        return FollowerLowSolution(
            regime=regime,
            z1=None,
            z2=None,
            z3=z3,
            a0_coef=None,
            b0_coef=b0,
            c0_coef=None,
            value=value,
        )

    z1, a0 = _lone_threshold(d.a1, d.k1, g)
    b0, c0, z2, z3 = _solve_inner_window(d, g, b, z1)
    if not z1 <= z2 <= z3:
        raise InconsistentParameterError(
            f"solved thresholds out of order: z1={z1}, z2={z2}, z3={z3}"
        )
    value = PiecewiseValue(
        breakpoints=(z1, z2, z3),
        segments=(
            (a0, 0.0, 0.0, 0.0),
            (0.0, 0.0, d.a1, -d.k1),
            (b0, -c0, 0.0, 0.0),
            (0.0, 0.0, d.a2, -d.k2),
        ),
        gamma=g,
        beta=b,
    )
    return FollowerLowSolution(
        regime=regime,
        z1=z1,
        z2=z2,
        z3=z3,
        a0_coef=a0,
        b0_coef=b0,
        c0_coef=c0,
        value=value,
    )


def eval_low(z, sol: FollowerLowSolution):
    return sol.value(z)


def eval_high(z, sol: FollowerHighSolution):
    return sol.value(z)


def follower_value(
    z,
    low_sol: FollowerLowSolution,
    high_sol: FollowerHighSolution,
    econ: EconParams,
):
    """Ex ante follower payoff: outcome-probability mix of the two values."""
    p = econ.p_high
    return p * high_sol.value(z) + (1.0 - p) * low_sol.value(z)


def follower_policy(z: float, outcome: str, sols) -> str:
    """Action prescription at demand z given the revealed outcome.

    ``sols`` is the matching solution object: FollowerHighSolution for
    "high", FollowerLowSolution for "low".  Returns one of "wait",
    "copy", "innovate".  Thresholds themselves act (stopped branch).
    """
    if outcome == "high":
        return "copy" if z >= sols.z_h else "wait"
    if outcome != "low":
        raise ValueError(f"outcome must be 'high' or 'low', got {outcome!r}")
    if sols.regime is FollowerRegime.ALWAYS_INNOVATE:
        return "innovate" if z >= sols.z3 else "wait"
    if sols.z1 <= z <= sols.z2:
        return "copy"
    if z >= sols.z3:
        return "innovate"
    return "wait"


def _segment_gap(value: PiecewiseValue, i: int, z: float) -> tuple[float, float]:
    # value/derivative mismatch between segments i and i+1 at breakpoint z
    g, b = value.gamma, value.beta
    gaps = []
    dgaps = []
    for cg, cb, c1, c0 in (value.segments[i], value.segments[i + 1]):
        gaps.append(cg * z**g + cb * z**b + c1 * z + c0)
        dgaps.append(cg * g * z ** (g - 1.0) + cb * b * z ** (b - 1.0) + c1)
    return gaps[1] - gaps[0], dgaps[1] - dgaps[0]


def _pasting_report(value: PiecewiseValue) -> list[dict]:
    out = []
    for i, z in enumerate(value.breakpoints):
        gap, dgap = _segment_gap(value, i, z)
        out.append({"threshold": z, "value_gap": gap, "slope_gap": dgap})
    return out


def low_solution_summary(sol: FollowerLowSolution) -> dict:
    """JSON-ready record of regime, thresholds, coefficients, residuals."""
    return {
        "regime": sol.regime.value,
        "z1": sol.z1,
        "z2": sol.z2,
        "z3": sol.z3,
        "a0_coef": sol.a0_coef,
        "b0_coef": sol.b0_coef,
        "c0_coef": sol.c0_coef,
        "pasting": _pasting_report(sol.value),
    }


def high_solution_summary(sol: FollowerHighSolution) -> dict:
    return {"z_h": sol.z_h, "pasting": _pasting_report(sol.value)}
