"""Exception and warning types shared across the package."""


class NVDecoherenceError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NVDecoherenceError, ValueError):
    pass


class NonHermitianInput(NVDecoherenceError, ValueError):
    pass


class InvalidDensityMatrix(NVDecoherenceError, ValueError):
    """A matrix failed density-matrix validation.

    ``invariant`` names the violated property and ``residual`` carries the
    measured violation.
    """

    invariant = "density"

    def __init__(self, residual, message=None):
        self.residual = float(residual)
        super().__init__(message or f"{self.invariant} violated (residual {self.residual:.3e})")


class NotHermitian(InvalidDensityMatrix):
    invariant = "hermiticity"


class TraceNotOne(InvalidDensityMatrix):
    invariant = "unit trace"


class NotPSD(InvalidDensityMatrix):
    invariant = "positive semidefiniteness"


class InvalidParam(NVDecoherenceError, ValueError):
    pass


class UnsupportedSchedule(NVDecoherenceError, ValueError):
    pass


class SequenceSyntaxError(NVDecoherenceError, ValueError):
    """Malformed sequence program. Carries 1-based ``line`` and ``column``."""

    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UndefinedParam(SequenceSyntaxError):
    pass


class NegativeDuration(SequenceSyntaxError):
    pass


class UnbalancedGatesWarning(UserWarning):
    """A cycle's gates do not multiply to the identity permutation."""


class ExtendedRangeWarning(UserWarning):
    """Parameters lie outside the range the closed-form results assume."""


class SubstepUnderflow(NVDecoherenceError, RuntimeError):
    pass


class InsufficientData(NVDecoherenceError, ValueError):
    pass


class QuadratureNotConverged(NVDecoherenceError, RuntimeError):
    pass


class ConfigError(NVDecoherenceError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownPreset(ConfigError):
    def __init__(self, name):
        super().__init__("preset", f"unknown preset {name!r}")


class OutOfRange(NVDecoherenceError, ValueError):
    """Argument outside the domain of a function (e.g. t' beyond the filter window)."""
