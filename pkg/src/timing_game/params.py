"""Model primitives, derived constants, and the shared piecewise value basis.

Demand follows a geometric Brownian motion dZ = alpha*Z dt + sigma*Z dB and
firms discount at rate r > alpha.  Every closed-form value function in the
engine is a piecewise combination of z^gamma, z^beta, z and 1, where gamma
and beta are the roots of the quadratic

    0.5*sigma^2 * x*(x - 1) + alpha*x - r = 0.

``PiecewiseValue`` stores exactly that representation, so one evaluator and
one continuity check cover the Cournot, follower, and leader values alike.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "MarketParams",
    "EconParams",
    "CharRoots",
    "DerivedCoeffs",
    "PiecewiseValue",
    "char_roots",
    "derived_coeffs",
    "cournot_value",
    "eval_piecewise",
    "load_config",
    "market_from_config",
    "econ_from_config",
    "derived_summary",
    "write_json",
]


@dataclass(frozen=True)
class MarketParams:
    """Demand-process primitives: drift, volatility, and the discount rate."""

    alpha: float
    sigma: float
    r: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not self.alpha < self.r:
            raise ValueError(
                f"discount rate must exceed drift: r={self.r}, alpha={self.alpha}"
            )


@dataclass(frozen=True)
class EconParams:
    """Economic primitives of the two-firm investment problem.

    Parameters
    ----------
    pi_low, pi_high : float
        Profit flow rates of the bad and good technology outcome.
    xi : float
        Extra profit flow the sole investor earns until the rival invests.
    inv_cost : float
        Cost of investing first (or of buying the untried technology).
    theta : float
        Fractional cost reduction enjoyed by a firm that copies, in (0, 1).
    p_high : float
        Probability that a fresh technology draw has the high profit rate.
        The equal-weight payoff combinations assume 1/2.
    """

    pi_low: float
    pi_high: float
    xi: float
    inv_cost: float
    theta: float
    p_high: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.pi_low < self.pi_high:
            raise ValueError(
                f"need 0 < pi_low < pi_high, got {self.pi_low}, {self.pi_high}"
            )
        if not self.inv_cost > 0.0:
            raise ValueError(f"inv_cost must be positive, got {self.inv_cost}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.xi < 0.0:
            raise ValueError(f"xi must be nonnegative, got {self.xi}")
        if not 0.0 <= self.p_high <= 1.0:
            raise ValueError(f"p_high must lie in [0, 1], got {self.p_high}")

    @property
    def expected_profit(self) -> float:
        return self.p_high * self.pi_high + (1.0 - self.p_high) * self.pi_low


@dataclass(frozen=True)
class CharRoots:
    gamma: float  # > 1
    beta: float  # < 0


@dataclass(frozen=True)
class DerivedCoeffs:
    """Slopes and costs of the copy/innovate stopping rewards.

    a1*z - k1 is the reward from copying a revealed low-profit technology,
    a2*z - k2 the expected reward from buying the untried one.
    """

    a1: float
    a2: float
    k1: float
    k2: float


def char_roots(market: MarketParams) -> CharRoots:
    """Roots of 0.5*sigma^2*x*(x-1) + alpha*x - r = 0.

    gamma = 1/2 - alpha/sigma^2 + sqrt((alpha/sigma^2 - 1/2)^2 + 2r/sigma^2)
    and beta is the conjugate with the minus sign.  alpha < r forces
    gamma > 1 and beta < 0.
    """
    s2 = market.sigma * market.sigma
    half_less_drift = 0.5 - market.alpha / s2
    disc = math.sqrt((market.alpha / s2 - 0.5) ** 2 + 2.0 * market.r / s2)
    return CharRoots(gamma=half_less_drift + disc, beta=half_less_drift - disc)


def root_residual(x: float, market: MarketParams) -> float:
    """Relative residual of the characteristic quadratic at x."""
    s2 = market.sigma * market.sigma
    value = 0.5 * s2 * x * (x - 1.0) + market.alpha * x - market.r
    scale = max(abs(0.5 * s2 * x * (x - 1.0)), abs(market.alpha * x), market.r)
    return value / scale


def derived_coeffs(market: MarketParams, econ: EconParams) -> DerivedCoeffs:
    gap = market.r - market.alpha
    return DerivedCoeffs(
        a1=econ.pi_low / gap,
        a2=econ.expected_profit / gap,
        k1=(1.0 - econ.theta) * econ.inv_cost,
        k2=econ.inv_cost,
    )


def cournot_value(z, market: MarketParams, econ: EconParams):
    """Value of investing simultaneously: affine in demand, -inv_cost at 0."""
    return econ.expected_profit * np.asarray(z, dtype=float) / (
        market.r - market.alpha
    ) - econ.inv_cost


@dataclass(frozen=True)
class PiecewiseValue:
    """A value function stored as segments of c_g*z^gamma + c_b*z^beta + c1*z + c0.

    ``breakpoints`` are the interior segment boundaries in ascending order;
    ``segments`` has one coefficient quadruple more than there are
    breakpoints.  Evaluation at a breakpoint uses the segment on its right.
    """

    breakpoints: tuple[float, ...]
    segments: tuple[tuple[float, float, float, float], ...]
    gamma: float
    beta: float

    def __post_init__(self) -> None:
        if len(self.segments) != len(self.breakpoints) + 1:
            raise ValueError(
                f"{len(self.breakpoints)} breakpoints require "
                f"{len(self.breakpoints) + 1} segments, got {len(self.segments)}"
            )
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError(f"breakpoints not strictly ascending: {self.breakpoints}")

    def segment_index(self, z: float) -> int:
        return bisect_right(self.breakpoints, z)

    def __call__(self, z):
        return eval_piecewise(self, z)

    def derivative(self, z):
        """First derivative, evaluated segment-wise (right segment at a breakpoint)."""
        z_arr = np.asarray(z, dtype=float)
        _reject_nonpositive(z_arr)
        idx = np.searchsorted(self.breakpoints, z_arr, side="right")
        coef = np.asarray(self.segments, dtype=float)[idx]
        out = (
            coef[..., 0] * self.gamma * z_arr ** (self.gamma - 1.0)
            + coef[..., 1] * self.beta * z_arr ** (self.beta - 1.0)
            + coef[..., 2]
        )
        return out if out.ndim else float(out)


def _reject_nonpositive(z_arr: np.ndarray) -> None:
    if np.any(z_arr <= 0.0):
        bad = np.asarray(z_arr)[np.asarray(z_arr) <= 0.0]
        raise ValueError(f"demand level must be positive, got {bad.flat[0]}")


def eval_piecewise(value: PiecewiseValue, z):
    """Evaluate a PiecewiseValue at scalar or array demand levels (z > 0)."""
    z_arr = np.asarray(z, dtype=float)
    _reject_nonpositive(z_arr)
    idx = np.searchsorted(value.breakpoints, z_arr, side="right")
    coef = np.asarray(value.segments, dtype=float)[idx]
    out = (
        coef[..., 0] * z_arr**value.gamma
        + coef[..., 1] * z_arr**value.beta
        + coef[..., 2] * z_arr
        + coef[..., 3]
    )
    return out if out.ndim else float(out)


# Flat key=value config handling.  '#' starts a comment, blank lines ignored.

_FLOAT_KEYS = (
    "alpha",
    "sigma",
    "r",
    "pi_low",
    "pi_high",
    "xi",
    "inv_cost",
    "theta",
    "p_high",
    "dt",
    "horizon",
)
_INT_KEYS = ("n_paths", "seed")
_MARKET_KEYS = ("alpha", "sigma", "r")
_ECON_KEYS = ("pi_low", "pi_high", "xi", "inv_cost", "theta", "p_high")


def load_config(path: str | Path) -> dict:
    """Parse a flat key=value config file into a typed dict."""
    out: dict = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _FLOAT_KEYS:
            caster = float
        elif key in _INT_KEYS:
            caster = int
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = caster(val)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: key {key!r} needs a {caster.__name__}, got {val!r}"
            ) from None
    return out


def _build_from_keys(config: dict, keys: tuple[str, ...], factory, label: str):
    missing = [k for k in keys if k not in config and k != "p_high"]
    if missing:
        raise ConfigError(f"missing {label} key(s): {', '.join(missing)}")
    try:
        return factory(**{k: config[k] for k in keys if k in config})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def market_from_config(config: dict) -> MarketParams:
    return _build_from_keys(config, _MARKET_KEYS, MarketParams, "market")


def econ_from_config(config: dict) -> EconParams:
    return _build_from_keys(config, _ECON_KEYS, EconParams, "economic")


def derived_summary(market: MarketParams, econ: EconParams) -> dict:
    """JSON-ready summary of the derived constants."""
    roots = char_roots(market)
    coeffs = derived_coeffs(market, econ)
    return {
        "gamma": roots.gamma,
        "beta": roots.beta,
        "a1": coeffs.a1,
        "a2": coeffs.a2,
        "k1": coeffs.k1,
        "k2": coeffs.k2,
        "expected_profit": econ.expected_profit,
        "root_residuals": [
            root_residual(roots.gamma, market),
            root_residual(roots.beta, market),
        ],
    }


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
