"""Exception types raised across the package.

Every error carries enough structured context (offending values, last
residuals, endpoints) for a caller to log or recover without string
parsing.
"""

from __future__ import annotations


class VpmeError(Exception):
    """Base class for all package errors."""


class DimensionError(VpmeError):
    """Operands live in different dimensions, or an operation does not
    support the requested dimension."""

    def __init__(self, message: str, expected=None, got=None):
        super().__init__(message)
        self.expected = expected
        self.got = got


class NonFiniteError(VpmeError):
    """NaN or infinity where a finite value is required."""


class ResolutionError(VpmeError):
    """Grid resolution outside the supported set (power of two, >= 8)."""

    def __init__(self, message: str, resolution=None):
        super().__init__(message)
        self.resolution = resolution


class InvariantError(VpmeError):
    """A declared data invariant failed at construction time."""


class SolverError(VpmeError):
    """Nonlinear field solve failed to reach tolerance."""

    def __init__(self, message: str, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FieldMismatchError(VpmeError):
    """A potential was paired with an ensemble it was not solved for."""


class TransportSizeError(VpmeError):
    """Exact transport problem too large; caller should use the entropic
    method instead."""

    def __init__(self, message: str, pairs=None, limit=None):
        super().__init__(message)
        self.pairs = pairs
        self.limit = limit


class EntropicError(VpmeError):
    """Sinkhorn iteration failed to meet the marginal tolerance."""

    def __init__(self, message: str, marginal_violation=None, gap=None):
        super().__init__(message)
        self.marginal_violation = marginal_violation
        self.gap = gap


class RootBracketError(VpmeError):
    """Root finder could not bracket or localize a root."""

    def __init__(self, message: str, lo=None, hi=None, g_lo=None, g_hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.g_lo = g_lo
        self.g_hi = g_hi


class TrajectoryRangeError(VpmeError):
    """Requested time outside the stored trajectory range, or missing
    field history."""


class ConfigError(VpmeError):
    """Malformed or inconsistent experiment configuration."""


class PerturbationFloorError(VpmeError):
    """Requested perturbation size is below the sampling resolution
    floor for the given particle count."""

    def __init__(self, message: str, requested=None, floor=None):
        super().__init__(message)
        self.requested = requested
        self.floor = floor


class SchemaError(VpmeError):
    """Persisted file does not match the expected layout."""

    def __init__(self, message: str, field=None):
        super().__init__(message)
        self.field = field
