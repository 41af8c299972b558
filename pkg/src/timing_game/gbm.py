"""Closed-form first-passage functionals of geometric Brownian demand,
plus the Monte Carlo path engine used as an oracle everywhere.

The closed forms live in the span of z^gamma and z^beta (the discounted-
harmonic powers).  The path engine steps the exact GBM law in log space:

    X_{t+dt} = X_t + (alpha - sigma^2/2) dt + sigma sqrt(dt) N(0,1)

so there is no discretization bias in the marginals; hitting times are
detected at grid points, which makes dt the accuracy knob for barrier
problems.  Paths are generated in fixed-size chunks with per-chunk seeds
derived from the master seed, so results are identical for a given
(seed, config) no matter how the chunks are executed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .params import CharRoots, MarketParams

__all__ = [
    "SimConfig",
    "TwoSidedFunctionals",
    "MCResult",
    "LevelDiscounts",
    "discount_at_hit",
    "generator_residual",
    "hit_upper_first_prob",
    "two_sided_functionals",
    "simulate_paths",
    "mc_policy_value",
    "mc_policy_value_set",
    "mc_two_sided_hit",
    "mc_hit_discount",
    "mc_level_discounts",
    "sim_from_config",
]

# Paths per seeding chunk.  Fixed (not tied to worker count) so the ensemble
# is a pure function of (seed, n_paths).
CHUNK = 1 << 16

# Steps per block of pre-generated shocks inside the stepping loops.
_BLOCK = 64


@dataclass(frozen=True)
class SimConfig:
    """Path-engine knobs: ensemble size, step, horizon cap, and seed."""

    n_paths: int
    dt: float
    horizon: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon > self.dt:
            raise ValueError(
                f"horizon must exceed dt, got horizon={self.horizon}, dt={self.dt}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


def sim_from_config(config: dict) -> SimConfig:
    missing = [k for k in ("n_paths", "dt", "horizon", "seed") if k not in config]
    if missing:
        raise ConfigError(f"missing simulation key(s): {', '.join(missing)}")
    try:
        return SimConfig(
            n_paths=config["n_paths"],
            dt=config["dt"],
            horizon=config["horizon"],
            seed=config["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TwoSidedFunctionals:
    """Exit functionals of a band: P(exit above) and the two discounted indicators."""

    p_upper_first: float
    disc_lower: float
    disc_upper: float


def discount_at_hit(z, target, roots: CharRoots):
    """E[e^{-r tau}] for the first passage from z to a single target level.

    Equals (z/target)^gamma when the hit is from below and (z/target)^beta
    from above; both collapse to 1 at z == target.
    """
    z_arr = np.asarray(z, dtype=float)
    t_arr = np.asarray(target, dtype=float)
    if np.any(z_arr <= 0.0) or np.any(t_arr <= 0.0):
        raise ValueError("demand levels must be positive")
    ratio = z_arr / t_arr
    out = np.where(ratio < 1.0, ratio**roots.gamma, ratio**roots.beta)
    return float(out) if out.ndim == 0 else out


def generator_residual(value, z, market: MarketParams, source=None):
    """Relative residual of the pricing operator applied to a value curve.

    Evaluates 0.5 sigma^2 z^2 V'' + alpha z V' - r V + source(z) by
    central finite differences.  On a waiting branch the curve solves
    that equation (source is the branch's profit flow, zero for a firm
    earning nothing while it waits), so the residual should vanish up to
    differencing error; keep z away from curve kinks by more than the
    step z * eps^(1/4).  Normalized by the largest single term so the
    result reads as a relative error.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0.0):
        raise ValueError("demand levels must be positive")
    h = z_arr * np.finfo(float).eps ** 0.25
    v0 = np.asarray(value(z_arr), dtype=float)
    vp = np.asarray(value(z_arr + h), dtype=float)
    vm = np.asarray(value(z_arr - h), dtype=float)
    lead = 0.5 * market.sigma**2 * z_arr**2 * (vp - 2.0 * v0 + vm) / (h * h)
    drift = market.alpha * z_arr * (vp - vm) / (2.0 * h)
    sink = -market.r * v0
    terms = lead + drift + sink
    scale = np.maximum(
        np.maximum(np.abs(lead), np.abs(drift)), np.maximum(np.abs(sink), 1.0)
    )
    if source is not None:
        src = np.asarray(source(z_arr), dtype=float)
        terms = terms + src
        scale = np.maximum(scale, np.abs(src))
    out = terms / scale
    return out if out.ndim else float(out)


def _check_band(z: float, lower: float, upper: float) -> None:
    if not 0.0 < lower < z < upper:
        raise ValueError(
            f"need 0 < lower < z < upper, got lower={lower}, z={z}, upper={upper}"
        )


def hit_upper_first_prob(
    z: float,
    lower: float,
    upper: float,
    market: MarketParams,
    variant: str = "log_drift",
) -> float:
    """Probability that demand reaches ``upper`` before ``lower``.

    variant="log_drift" uses the scale function of log-demand, whose drift
    is alpha - sigma^2/2; this is the variant the Monte Carlo engine
    confirms.  variant="abs_drift" uses the exponent 2|alpha|/sigma^2
    instead, omitting the -sigma^2/2 correction; it is kept for comparison
    and its gap from the simulated probability is part of the verification
    report.
    """
    _check_band(z, lower, upper)
    s2 = market.sigma * market.sigma
    if variant == "log_drift":
        # scale density of log-demand is exp(-2 mu x / sigma^2), so the
        # scale function is proportional to -z^(-expo); the minus sign is
        # what flips the ratios relative to the published shape
        expo = 2.0 * (market.alpha - 0.5 * s2) / s2
        if abs(expo) < 1e-12:
            return math.log(z / lower) / math.log(upper / lower)
        num = 1.0 - (z / lower) ** expo
        den = (z / upper) ** expo - (z / lower) ** expo
        return num / den
    if variant == "abs_drift":
        expo = 2.0 * abs(market.alpha) / s2
        if abs(expo) < 1e-12:
            return math.log(z / lower) / math.log(upper / lower)
        num = 1.0 - (lower / z) ** expo
        den = (upper / z) ** expo - (lower / z) ** expo
        return num / den
    raise ValueError(f"unknown variant {variant!r}")


def two_sided_functionals(
    z: float,
    lower: float,
    upper: float,
    market: MarketParams,
    roots: CharRoots,
) -> TwoSidedFunctionals:
    """Discounted exit decomposition of the band (lower, upper) from z.

    disc_upper solves the two-point boundary problem in the (z^gamma,
    z^beta) basis with value 0 at ``lower`` and 1 at ``upper``; disc_lower
    is the mirror image.  Written in ratio form so wide bands cannot
    overflow the powers.
    """
    _check_band(z, lower, upper)
    spread = roots.gamma - roots.beta
    up_num = (z / lower) ** spread - 1.0
    up_den = (upper / lower) ** spread - 1.0
    disc_upper = (z / upper) ** roots.beta * up_num / up_den
    lo_num = 1.0 - (z / upper) ** -spread
    lo_den = 1.0 - (lower / upper) ** -spread
    disc_lower = (z / lower) ** roots.gamma * lo_num / lo_den
    return TwoSidedFunctionals(
        p_upper_first=hit_upper_first_prob(z, lower, upper, market, "log_drift"),
        disc_lower=float(disc_lower),
        disc_upper=float(disc_upper),
    )


def chunk_rngs(seed: int, n_paths: int):
    """Yield (count, generator) pairs covering n_paths in fixed-size chunks."""
    for c in range(0, (n_paths + CHUNK - 1) // CHUNK):
        count = min(CHUNK, n_paths - c * CHUNK)
        yield count, np.random.default_rng(np.random.SeedSequence([seed, c]))


def simulate_paths(z0: float, config: SimConfig, market: MarketParams) -> np.ndarray:
    """Full path ensemble, shape (n_paths, n_steps + 1), exact GBM scheme.

    Materializes every step; intended for moderate configs (tests, debug
    traces).  The stopped-value estimators below never build this matrix.
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    n_steps = config.n_steps
    drift = (market.alpha - 0.5 * market.sigma**2) * config.dt
    vol = market.sigma * math.sqrt(config.dt)
    out = np.empty((config.n_paths, n_steps + 1), dtype=float)
    row = 0
    for count, rng in chunk_rngs(config.seed, config.n_paths):
        increments = drift + vol * rng.standard_normal((count, n_steps))
        logs = np.cumsum(increments, axis=1)
        out[row : row + count, 0] = z0
        out[row : row + count, 1:] = z0 * np.exp(logs)
        row += count
    return out


@dataclass(frozen=True)
class MCResult:
    """Monte Carlo estimate with its standard error and truncation accounting."""

    estimate: float
    stderr: float
    n_paths: int
    cap_fraction: float
    abandoned_fraction: float = 0.0

    def __iter__(self):
        return iter((self.estimate, self.stderr))

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "cap_fraction": self.cap_fraction,
        }


def _log_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    for lo, hi in intervals:
        if hi <= lo:
            raise ValueError(f"empty stopping interval ({lo}, {hi})")
        log_lo = -np.inf if lo <= 0.0 else math.log(lo)
        log_hi = np.inf if math.isinf(hi) else math.log(hi)
        out.append((np.float32(log_lo), np.float32(log_hi)))
    return out


def _membership(x: np.ndarray, log_iv: list[tuple[float, float]]) -> np.ndarray:
    mask = np.zeros(x.shape, dtype=bool)
    for lo, hi in log_iv:
        mask |= (x >= lo) & (x <= hi)
    return mask


def _compile_membership(log_iv: list[tuple[float, float]]):
    """Build a minimal-op membership test writing into a preallocated mask."""
    if len(log_iv) == 1:
        (lo, hi), = log_iv
        if np.isneginf(lo):
            return lambda x, out, tmp: np.less_equal(x, hi, out=out)
        if np.isposinf(hi):
            return lambda x, out, tmp: np.greater_equal(x, lo, out=out)

        def single(x, out, tmp):
            np.greater_equal(x, lo, out=out)
            np.less_equal(x, hi, out=tmp)
            return np.logical_and(out, tmp, out=out)

        return single
    if len(log_iv) == 2 and np.isneginf(log_iv[0][0]) and np.isposinf(log_iv[1][1]):
        low_hi, up_lo = log_iv[0][1], log_iv[1][0]

        def two_rays(x, out, tmp):
            np.less_equal(x, low_hi, out=out)
            np.greater_equal(x, up_lo, out=tmp)
            return np.logical_or(out, tmp, out=out)

        return two_rays

    def generic(x, out, tmp):
        out.fill(False)
        for lo, hi in log_iv:
            np.greater_equal(x, lo, out=tmp)
            tmp &= x <= hi
            out |= tmp
        return out

    return generic


def _stopped_value_mc(
    z0: float,
    stop_intervals: Sequence[tuple[float, float]],
    functionals: Sequence[tuple[Callable[[np.ndarray], np.ndarray], float]],
    config: SimConfig,
    market: MarketParams,
    *,
    discount_rate: float | None = None,
    abandon_level: float | Callable[[float], float] | None = None,
    bridge_barriers: tuple[float | None, float | None] | None = None,
) -> list[MCResult]:
    """Core estimator of E[int_0^tau flow_coef*Z e^{-rs} ds + e^{-r tau} reward(Z_tau)].

    Each (reward, flow_coef) functional is priced on the same path
    ensemble; the flow integral enters linearly so a single unscaled
    accumulator serves every functional.  tau is the first grid time the
    path sits inside the stopping region, capped at the horizon.  Paths
    falling below ``abandon_level`` are retired early with only their
    accumulated flow; the caller is responsible for choosing a level
    whose foregone value is negligible.

    ``bridge_barriers=(lower, upper)`` (either side may be None) switches
    detection to Brownian-bridge absorption sampling against those
    barriers, removing the O(sqrt(dt)) grid-detection bias; paths are
    settled at the exact barrier level.  Needed for exit probabilities,
    bare hitting discounts, and any value whose slope is kinked at the
    stopping boundary (no smooth-pasting cancellation softens the bias
    in those cases).  The barriers must delimit the stopping region.

    States are float32 in log space; shocks are generated in blocks;
    payoff accumulation is float64.
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    if not stop_intervals:
        raise ValueError("stopping region must be a nonempty union of intervals")
    if not functionals:
        raise ValueError("need at least one (reward, flow_coef) functional")
    log_iv = _log_intervals(stop_intervals)
    rate = market.r if discount_rate is None else discount_rate
    x0 = math.log(z0)
    n_func = len(functionals)
    rewards = [rw for rw, _ in functionals]
    flows = np.array([fc for _, fc in functionals], dtype=np.float64)

    if _membership(np.array([x0], dtype=np.float32), log_iv)[0]:
        return [
            MCResult(float(rw(np.array([z0]))[0]), 0.0, config.n_paths, 0.0)
            for rw in rewards
        ]

    has_flow = bool(np.any(flows != 0.0))
    bridged = bridge_barriers is not None
    dt = config.dt
    drift = np.float32((market.alpha - 0.5 * market.sigma**2) * dt)
    vol = np.float32(market.sigma * math.sqrt(dt))
    n_steps = config.n_steps
    disc = np.exp(-rate * dt * np.arange(n_steps + 1))
    membership = _compile_membership(log_iv)
    if bridged:
        b_lo, b_hi = bridge_barriers
        if b_lo is None and b_hi is None:
            raise ValueError("bridge_barriers needs at least one barrier")
        log_lo = np.float32(math.log(b_lo)) if b_lo is not None else None
        log_hi = np.float32(math.log(b_hi)) if b_hi is not None else None
        neg2_inv_var = np.float32(-2.0 / (market.sigma**2 * dt))
        # reward is settled exactly at the barrier, so it is a constant per side
        reward_lo = (
            np.array([float(rw(np.array([b_lo]))[0]) for rw in rewards])
            if b_lo is not None
            else np.zeros(n_func)
        )
        reward_hi = (
            np.array([float(rw(np.array([b_hi]))[0]) for rw in rewards])
            if b_hi is not None
            else np.zeros(n_func)
        )
    aband_log = (
        np.float32(math.log(abandon_level))
        if abandon_level is not None and not callable(abandon_level)
        else None
    )

    totals = np.zeros(n_func)
    totals_sq = np.zeros(n_func)
    capped = 0
    abandoned = 0

    def settle(payoffs: np.ndarray):
        # payoffs has shape (n_func, n_retired)
        nonlocal totals, totals_sq
        totals += payoffs.sum(axis=1)
        totals_sq += (payoffs * payoffs).sum(axis=1)

    for count, rng in chunk_rngs(config.seed, config.n_paths):
        x = np.full(count, x0, dtype=np.float32)
        xn = np.empty_like(x)
        mask = np.empty(count, dtype=bool)
        tmp = np.empty(count, dtype=bool)
        alive = np.ones(count, dtype=bool)
        n_alive = count
        facc = np.zeros(count, dtype=np.float64) if has_flow else None
        z_prev = np.full(count, z0, dtype=np.float32) if has_flow else None
        qbuf = np.empty(count, dtype=np.float32) if bridged else None
        pbuf = np.empty(count, dtype=np.float32) if bridged else None

        def retire(hit_mask: np.ndarray, payoffs: np.ndarray) -> int:
            nonlocal n_alive
            settle(payoffs)
            np.logical_and(alive, ~hit_mask, out=alive)
            m = int(np.count_nonzero(hit_mask))
            n_alive -= m
            return m

        for block_start in range(0, n_steps, _BLOCK):
            block = min(_BLOCK, n_steps - block_start)
            shocks = rng.standard_normal((block, x.shape[0]), dtype=np.float32)
            shocks *= vol
            shocks += drift
            uniforms = (
                rng.random((block, x.shape[0]), dtype=np.float32) if bridged else None
            )
            for j in range(block):
                k = block_start + j + 1
                np.add(x, shocks[j], out=xn)
                if has_flow:
                    z_now = np.exp(xn)
                    contrib = (0.5 * dt) * (
                        disc[k - 1] * z_prev.astype(np.float64)
                        + disc[k] * z_now.astype(np.float64)
                    )
                    facc += np.where(alive, contrib, 0.0)
                    z_prev = z_now
                if not bridged:
                    membership(xn, mask, tmp)
                    np.logical_and(mask, alive, out=mask)
                    if mask.any():
                        z_stop = np.exp(xn[mask].astype(np.float64))
                        pay = np.stack([disc[k] * rw(z_stop) for rw in rewards])
                        if has_flow:
                            pay = pay + flows[:, None] * facc[mask]
                        retire(mask, pay)
                else:
                    # crossing prob p = exp(-2 (b-x)(b-x')/(sigma^2 dt));
                    # an endpoint landing beyond the barrier gives p = 1,
                    # so this subsumes grid detection entirely.
                    u = uniforms[j]
                    if log_lo is not None:
                        np.subtract(x, log_lo, out=qbuf)
                        qbuf *= xn - log_lo
                        np.maximum(qbuf, np.float32(0.0), out=qbuf)
                        qbuf *= neg2_inv_var
                        np.exp(qbuf, out=pbuf)
                        np.less(u, pbuf, out=mask)
                        np.logical_and(mask, alive, out=mask)
                        if mask.any():
                            m = int(np.count_nonzero(mask))
                            pay = np.broadcast_to(
                                disc[k] * reward_lo[:, None], (n_func, m)
                            ).copy()
                            if has_flow:
                                pay += flows[:, None] * facc[mask]
                            retire(mask, pay)
                    if log_hi is not None:
                        # lower-barrier retires already left alive, so the
                        # rare both-sides overlap resolves to the lower hit
                        np.subtract(log_hi, x, out=qbuf)
                        qbuf *= log_hi - xn
                        np.maximum(qbuf, np.float32(0.0), out=qbuf)
                        qbuf *= neg2_inv_var
                        np.exp(qbuf, out=pbuf)
                        np.subtract(np.float32(1.0), pbuf, out=pbuf)
                        np.greater(u, pbuf, out=tmp)
                        np.logical_and(tmp, alive, out=tmp)
                        if tmp.any():
                            m = int(np.count_nonzero(tmp))
                            pay = np.broadcast_to(
                                disc[k] * reward_hi[:, None], (n_func, m)
                            ).copy()
                            if has_flow:
                                pay += flows[:, None] * facc[tmp]
                            retire(tmp, pay)
                if abandon_level is not None:
                    if callable(abandon_level):
                        lvl = np.float32(math.log(abandon_level(k * dt)))
                    else:
                        lvl = aband_log
                    np.less(xn, lvl, out=tmp)
                    np.logical_and(tmp, alive, out=tmp)
                    if tmp.any():
                        m = int(np.count_nonzero(tmp))
                        abandoned += m
                        retire(
                            tmp,
                            flows[:, None] * facc[tmp]
                            if has_flow
                            else np.zeros((n_func, m)),
                        )
                x, xn = xn, x
                if n_alive == 0:
                    break
            if n_alive == 0:
                break
            if n_alive < 0.6 * x.shape[0]:
                x = x[alive].copy()
                xn = np.empty_like(x)
                mask = np.empty_like(alive[alive])
                tmp = np.empty_like(mask)
                if has_flow:
                    facc = facc[alive].copy()
                    z_prev = z_prev[alive].copy()
                if bridged:
                    qbuf = np.empty(x.shape[0], dtype=np.float32)
                    pbuf = np.empty_like(qbuf)
                alive = np.ones(x.shape[0], dtype=bool)
        if n_alive:
            capped += n_alive
            settle(
                flows[:, None] * facc[alive]
                if has_flow
                else np.zeros((n_func, n_alive))
            )

    n = config.n_paths
    out = []
    for i in range(n_func):
        mean = totals[i] / n
        var = max(0.0, (totals_sq[i] - n * mean * mean) / max(1, n - 1))
        out.append(
            MCResult(
                estimate=mean,
                stderr=math.sqrt(var / n),
                n_paths=n,
                cap_fraction=capped / n,
                abandoned_fraction=abandoned / n,
            )
        )
    return out


def mc_policy_value(
    z0: float,
    policy: Sequence[tuple[float, float]],
    reward: Callable[[np.ndarray], np.ndarray],
    config: SimConfig,
    market: MarketParams,
    *,
    flow_coef: float = 0.0,
    abandon_level: float | Callable[[float], float] | None = None,
    bridge_barriers: tuple[float | None, float | None] | None = None,
) -> MCResult:
    """Value of the stopping rule "stop on first entry into ``policy``".

    ``policy`` is a finite union of demand intervals (lo, hi); ``reward``
    maps stop-state demand to the payoff collected there.  ``flow_coef``
    adds a running profit stream flow_coef * Z_s until the stop.  Pass
    ``bridge_barriers`` when the reward has a slope kink at a stopping
    boundary, else the grid-crossing bias is O(sqrt(dt)).  Returns the
    estimate, its standard error, and the horizon-cap fraction.
    """
    return _stopped_value_mc(
        z0,
        policy,
        [(reward, flow_coef)],
        config,
        market,
        abandon_level=abandon_level,
        bridge_barriers=bridge_barriers,
    )[0]


def mc_policy_value_set(
    z0: float,
    policy: Sequence[tuple[float, float]],
    functionals: Sequence[tuple[Callable[[np.ndarray], np.ndarray], float]],
    config: SimConfig,
    market: MarketParams,
    *,
    abandon_level: float | Callable[[float], float] | None = None,
    bridge_barriers: tuple[float | None, float | None] | None = None,
) -> list[MCResult]:
    """Price several (reward, flow_coef) functionals on one path ensemble.

    Same semantics as mc_policy_value applied to each pair, but the paths
    are simulated once, so pricing K functionals of the same stopping rule
    costs about as much as pricing the most expensive one.  Estimates for
    the same functional agree with a lone mc_policy_value call at the same
    seed; standard errors are computed per functional.
    """
    return _stopped_value_mc(
        z0,
        policy,
        functionals,
        config,
        market,
        abandon_level=abandon_level,
        bridge_barriers=bridge_barriers,
    )


def mc_two_sided_hit(
    z0: float,
    lower: float,
    upper: float,
    config: SimConfig,
    market: MarketParams,
) -> MCResult:
    """Simulated probability of leaving the band (lower, upper) through the top.

    Uses Brownian-bridge absorption at both barriers, so the estimate is
    free of the usual grid-detection bias.
    """
    _check_band(z0, lower, upper)
    return _stopped_value_mc(
        z0,
        [(0.0, lower), (upper, math.inf)],
        [(lambda z: (z >= upper).astype(float), 0.0)],
        config,
        market,
        discount_rate=0.0,
        bridge_barriers=(lower, upper),
    )[0]


@dataclass(frozen=True)
class LevelDiscounts:
    """Per-path discounted first-hit records for a ladder of demand levels.

    ``discounts[p, k]`` holds e^{-r tau_k} for path p and ladder level k,
    and 0 when the level was not reached before absorption or the horizon.
    One ensemble therefore prices every stopping rule of the form "stop at
    the first hit of level k, unless absorbed earlier", and differences
    between rules carry common-random-number accuracy.
    """

    levels: np.ndarray
    discounts: np.ndarray
    cap_fraction: float


def mc_level_discounts(
    z0: float,
    levels: Sequence[float],
    config: SimConfig,
    market: MarketParams,
    *,
    absorb_lower: float | None = None,
    absorb_upper: float | None = None,
) -> LevelDiscounts:
    """Record every ladder level's first-hit discount on a shared ensemble.

    Detection uses Brownian-bridge crossing draws against the nearest
    pending level on each side of the running state.  One uniform per step
    drives a whole side: the bridge-extremum law P(max >= b) = e^{-2(b-x)(b-x')/(sigma^2 dt)}
    nests multiplicatively across levels, so reusing the draw for the next
    pending level after a hit reproduces the exact joint law of "which
    levels were touched this step".  Hits are discounted at the end of the
    crossing step (O(dt) timing error, same convention as the band
    estimators above).

    ``absorb_lower`` / ``absorb_upper`` retire a path once that level is
    hit; the absorbing hit itself is still recorded.  Both must be members
    of ``levels``.  A level equal to z0 is recorded as hit at time zero.
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    lev = np.asarray(levels, dtype=float)
    if lev.ndim != 1 or lev.size == 0:
        raise ValueError("levels must be a nonempty 1-D ladder")
    if np.any(lev <= 0.0) or np.any(np.diff(lev) <= 0.0):
        raise ValueError("levels must be positive and strictly increasing")

    def absorb_index(val: float | None) -> int:
        if val is None:
            return -1
        pos = int(np.searchsorted(lev, val))
        if pos >= lev.size or lev[pos] != val:
            raise ValueError(f"absorbing level {val} is not in the ladder")
        return pos

    i_ab_lo = absorb_index(absorb_lower)
    i_ab_hi = absorb_index(absorb_upper)

    x0 = np.float32(math.log(z0))
    lad = np.log(lev).astype(np.float32)
    # slot s in the padded ladder refers to level s - 1; the sentinels keep
    # an exhausted side pointing at an unreachable barrier
    lad_pad = np.concatenate(
        (np.array([-np.inf], dtype=np.float32), lad, np.array([np.inf], dtype=np.float32))
    )
    start_up = int(np.searchsorted(lad, x0, side="right")) + 1
    start_dn = int(np.searchsorted(lad, x0, side="left"))

    D = np.zeros((config.n_paths, lev.size), dtype=np.float32)
    at_start = np.flatnonzero(lad == x0)
    if at_start.size:
        D[:, at_start] = 1.0

    dt = config.dt
    drift = np.float32((market.alpha - 0.5 * market.sigma**2) * dt)
    vol = np.float32(market.sigma * math.sqrt(dt))
    neg2_inv_var = np.float32(-2.0 / (market.sigma**2 * dt))
    n_steps = config.n_steps
    disc = np.exp(-market.r * dt * np.arange(n_steps + 1)).astype(np.float32)

    capped = 0
    row0 = 0
    for count, rng in chunk_rngs(config.seed, config.n_paths):
        x = np.full(count, x0, dtype=np.float32)
        xn = np.empty_like(x)
        gidx = np.arange(row0, row0 + count, dtype=np.int64)
        up = np.full(count, start_up, dtype=np.int64)
        dn = np.full(count, start_dn, dtype=np.int64)
        up_lev = lad_pad[up]
        dn_lev = lad_pad[dn]
        alive = np.ones(count, dtype=bool)
        n_alive = count
        qa = np.empty(count, dtype=np.float32)
        qb = np.empty(count, dtype=np.float32)
        hit = np.empty(count, dtype=bool)

        for block_start in range(0, n_steps, _BLOCK):
            block = min(_BLOCK, n_steps - block_start)
            shocks = rng.standard_normal((block, x.shape[0]), dtype=np.float32)
            shocks *= vol
            shocks += drift
            uniforms = rng.random((block, x.shape[0]), dtype=np.float32)
            for j in range(block):
                k = block_start + j + 1
                np.add(x, shocks[j], out=xn)
                u = uniforms[j]
                dk = disc[k]

                # falling side first; the vanishingly rare both-sides step
                # resolves to the lower hit, matching the band estimator
                np.subtract(x, dn_lev, out=qa)
                np.subtract(xn, dn_lev, out=qb)
                qa *= qb
                np.maximum(qa, np.float32(0.0), out=qa)
                qa *= neg2_inv_var
                np.exp(qa, out=qa)
                np.less(u, qa, out=hit)
                hit &= alive
                rows = np.flatnonzero(hit)
                while rows.size:
                    li = dn[rows] - 1
                    D[gidx[rows], li] = dk
                    dead = li == i_ab_lo
                    if dead.any():
                        dr = rows[dead]
                        alive[dr] = False
                        n_alive -= dr.size
                        rows = rows[~dead]
                        if rows.size == 0:
                            break
                    dn[rows] -= 1
                    dn_lev[rows] = lad_pad[dn[rows]]
                    lv = dn_lev[rows]
                    q = (x[rows] - lv) * (xn[rows] - lv)
                    p = np.exp(np.maximum(q, np.float32(0.0)) * neg2_inv_var)
                    rows = rows[u[rows] < p]

                np.subtract(up_lev, x, out=qa)
                np.subtract(up_lev, xn, out=qb)
                qa *= qb
                np.maximum(qa, np.float32(0.0), out=qa)
                qa *= neg2_inv_var
                np.exp(qa, out=qa)
                np.subtract(np.float32(1.0), qa, out=qa)
                np.greater(u, qa, out=hit)
                hit &= alive
                rows = np.flatnonzero(hit)
                while rows.size:
                    li = up[rows] - 1
                    D[gidx[rows], li] = dk
                    dead = li == i_ab_hi
                    if dead.any():
                        dr = rows[dead]
                        alive[dr] = False
                        n_alive -= dr.size
                        rows = rows[~dead]
                        if rows.size == 0:
                            break
                    up[rows] += 1
                    up_lev[rows] = lad_pad[up[rows]]
                    lv = up_lev[rows]
                    q = (lv - x[rows]) * (lv - xn[rows])
                    p = np.exp(np.maximum(q, np.float32(0.0)) * neg2_inv_var)
                    rows = rows[u[rows] > np.float32(1.0) - p]

                x, xn = xn, x
                if n_alive == 0:
                    break
            if n_alive == 0:
                break
            if n_alive < 0.6 * x.shape[0]:
                keep = alive
                x = x[keep].copy()
                xn = np.empty_like(x)
                gidx = gidx[keep].copy()
                up = up[keep].copy()
                dn = dn[keep].copy()
                up_lev = up_lev[keep].copy()
                dn_lev = dn_lev[keep].copy()
                qa = np.empty_like(x)
                qb = np.empty_like(x)
                hit = np.empty(x.shape[0], dtype=bool)
                alive = np.ones(x.shape[0], dtype=bool)
        capped += n_alive
        row0 += count

    return LevelDiscounts(
        levels=lev,
        discounts=D,
        cap_fraction=capped / config.n_paths,
    )


def mc_hit_discount(
    z0: float,
    target: float,
    config: SimConfig,
    market: MarketParams,
) -> MCResult:
    """Simulated E[e^{-r tau}] for the first passage of demand to ``target``.

    Bridge absorption on the target side keeps the estimate unbiased up to
    O(dt); the horizon cap truncates the never-hit tail, which for a
    distant target understates the true discount slightly.
    """
    if not (z0 > 0.0 and target > 0.0):
        raise ValueError("z0 and target must be positive")
    ones = lambda z: np.ones_like(z, dtype=float)
    if target == z0:
        return MCResult(1.0, 0.0, config.n_paths, 0.0)
    if target > z0:
        intervals = [(target, math.inf)]
        barriers: tuple[float | None, float | None] = (None, target)
    else:
        intervals = [(0.0, target)]
        barriers = (target, None)
    return _stopped_value_mc(
        z0, intervals, [(ones, 0.0)], config, market, bridge_barriers=barriers
    )[0]
