"""Package-wide error types mapped to CLI exit codes."""

from __future__ import annotations

__all__ = ["ConfigError", "SolverError", "InvariantViolation"]


class ConfigError(ValueError):
    """Invalid configuration or construction arguments (exit code 2)."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge to tolerance (exit code 3)."""


class InvariantViolation(RuntimeError):
    """A runtime invariant check failed (exit code 4)."""
