"""Exception types shared across the package."""


class BGKError(Exception):
    """Base class for all package errors."""


class ConfigError(BGKError):
    """Invalid configuration: grid sizes, weight exponents, CFL, parse errors."""


class DegenerateStateError(BGKError):
    """Moments fell below the density/temperature floor."""


class NumericsError(BGKError):
    """Non-finite values or failed numerical preconditions."""


class DomainError(BGKError):
    """Geometric precondition violated (point not on the boundary, etc.)."""


class SchemeViolationError(BGKError):
    """A structural guarantee of a scheme (positivity, mass balance) failed."""


class FitError(BGKError):
    """Decay fit could not be performed (too few usable points)."""
