"""Exception hierarchy shared by the simulator modules."""


class HybridQslError(Exception):
    """Base class for all package errors."""


class NumericalError(HybridQslError):
    """Failure during a numerical step (maps to CLI exit code 3)."""


class ConfigError(HybridQslError):
    """Bad user input or configuration (maps to CLI exit code 2)."""


class NonHermitianInput(NumericalError, ValueError):
    pass


class NonFiniteDerivative(NumericalError):
    pass


class TooFewSamples(NumericalError, ValueError):
    pass


class InvalidParameter(ConfigError, ValueError):
    pass


class LayoutMismatch(NumericalError, ValueError):
    pass


class AllTrajectoriesFailed(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class KernelRangeExceeded(NumericalError, ValueError):
    pass


class ZeroDenominator(NumericalError, ZeroDivisionError):
    pass


class IndexOutOfRange(HybridQslError, IndexError):
    pass


class MixedInitialState(HybridQslError, ValueError):
    """The series does not start from a pure site/level projector."""


class AsymmetricTable(ConfigError, ValueError):
    pass


class OverrideShapeMismatch(ConfigError, ValueError):
    pass


class ParseError(ConfigError):
    """Malformed configuration text; carries the offending line or field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(ConfigError, ValueError):
    """A configuration value violates a named constraint."""

    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")
