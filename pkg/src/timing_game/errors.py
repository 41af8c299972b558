"""Typed failures raised by the solvers and the game engine."""

from __future__ import annotations


class ConfigError(ValueError):
    """A config file key is missing, unknown, or has an unusable value."""


class SolverConvergenceError(RuntimeError):
    """A free-boundary solver failed to reach the requested residual tolerance."""


class InconsistentParameterError(RuntimeError):
    """A solve finished but produced thresholds that violate the required ordering."""


class RegimeError(ValueError):
    """Operation invoked outside the parameter regime it supports."""


class ScenarioShapeError(RuntimeError):
    """Leader/follower curves do not have the expected two-crossing shape.

    Carries the scan grid so the caller can inspect where the sign pattern
    went wrong.
    """

    def __init__(self, message: str, grid=None, gap=None):
        super().__init__(message)
        self.grid = grid
        self.gap = gap


class GeometryError(RuntimeError):
    """Value-function ordering broke down where the equilibrium needs it."""


class UndefinedPayoffError(ValueError):
    """Simultaneous-move payoff is undefined: zero intensities and zero slopes."""
