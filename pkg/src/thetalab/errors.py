"""Exception and warning types shared across the package."""


class ThetaLabError(Exception):
    """Base class for all errors raised by thetalab."""


class NotSymmetricError(ThetaLabError):
    """Period matrix is not symmetric within tolerance."""


class NotPositiveDefiniteError(ThetaLabError):
    """Imaginary part of the period matrix is not positive definite."""


class RadiusOverflowError(ThetaLabError):
    """Required lattice truncation radius exceeds the configured cap."""


class DivisionUnderflowError(ThetaLabError):
    """Leading asymptotic term is too small for a meaningful residual."""


class BasePointError(ThetaLabError):
    """All sections vanish at the requested point; the embedding is undefined there."""


class ChartFailureError(ThetaLabError):
    """Selected affine chart coordinate is too small; retry with another index."""


class DisconnectedError(ThetaLabError):
    """Graph shortest-path query on a disconnected graph (defensive; cannot
    happen on a torus grid)."""


class NonPositiveValueError(ThetaLabError):
    """Rate fit requires strictly positive values."""


class ConfigError(ThetaLabError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class GridTooCoarseWarning(UserWarning):
    """Quadrature grid looks under-resolved for the requested level."""


class SchemeDisagreementWarning(UserWarning):
    """Analytic and finite-difference metric schemes disagree beyond tolerance."""
