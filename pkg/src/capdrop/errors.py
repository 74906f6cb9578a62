"""Exception types shared across the package."""


class CapdropError(Exception):
    """Base class for all capdrop errors."""


class InvalidGridError(CapdropError):
    """Grid is too coarse or malformed for the requested operation."""


class DimensionMismatchError(CapdropError):
    """A nodal field does not match the grid it is paired with."""


class DegenerateProfileError(CapdropError):
    """Profile has (numerically) zero enclosed volume."""


class RecentreDomainError(CapdropError):
    """Curve is not star-shaped about the requested pole, or no interior
    minimizer exists for the recentring objective."""


class ConvergenceError(CapdropError):
    """Iterative solver ran out of iterations.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message, solution=None, eps=None):
        super().__init__(message)
        self.solution = solution
        self.eps = eps


class ShootingError(CapdropError):
    """Root find of the shooting solver diverged; carries the residual vector."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateFrameError(CapdropError):
    """Moving-frame normalisation integral is too small to invert."""


class PositivityError(CapdropError):
    """A proposed update would make the radial profile nonpositive."""


class StiffnessError(CapdropError):
    """Adaptive time step underflowed; the explicit flow cannot proceed."""


class ConditioningError(CapdropError):
    """Mass matrix condition number exceeds the trusted range."""


class EigenvalueDomainError(CapdropError):
    """Spectral function evaluated outside its domain (e.g. fractional power
    of a nonpositive eigenvalue); signals a positivity failure upstream."""


class ConfigError(CapdropError):
    """Configuration text failed validation; carries the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
