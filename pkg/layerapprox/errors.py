"""Errors raised throughout the package, each with a machine readable category."""


class ApproxError(Exception):
    """Base class for all errors raised by layerapprox."""

    category = "error"
    exit_code = 1


class ConfigError(ApproxError):
    """Invalid configuration value or unknown configuration key."""

    category = "config"
    exit_code = 2


class ResourceExhaustedError(ApproxError):
    """A grid or table would exceed the configured memory budget."""

    category = "resource"
    exit_code = 3


class InvalidOracleError(ApproxError):
    """An oracle returned non-finite values or a wrongly shaped result."""

    category = "oracle"
    exit_code = 4


class DimensionMismatchError(ApproxError, ValueError):
    """Input points do not match the dimension a model or grid expects."""

    category = "dimension"
    exit_code = 5


class DomainError(ApproxError, ValueError):
    """A value lies outside the domain an operation is defined on."""

    category = "domain"
    exit_code = 6


class UnsupportedPrecisionError(ApproxError):
    """Hilbert index width d*k exceeds the supported 64 bits."""

    category = "precision"
    exit_code = 7


class TrainingDivergedError(ApproxError):
    """Every restart of a fit produced a non-finite loss."""

    category = "divergence"
    exit_code = 8


class DegenerateResidualError(ApproxError):
    """A residual cannot be normalised because its scale is (numerically) zero."""

    category = "degenerate"
    exit_code = 9


class CertificationError(ApproxError):
    """A layer map failed its invertibility certificate."""

    category = "certification"
    exit_code = 10

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


class BoundViolationError(ApproxError):
    """A measured error exceeds a bound that must hold analytically."""

    category = "bound"
    exit_code = 11


class ReportIOError(ApproxError):
    """Reading or writing a report or model file failed."""

    category = "io"
    exit_code = 12
