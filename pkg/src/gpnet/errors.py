"""Exception taxonomy shared by all modules."""


class GpnetError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(GpnetError):
    """Operands do not conform in shape."""


class NonFinite(GpnetError):
    """A NaN or infinity appeared where a finite value is required."""


class NotSymmetric(GpnetError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NotPositiveDefinite(GpnetError):
    """Cholesky factorization failed even after jitter escalation."""


class BetaOutOfRange(GpnetError):
    """A tempering weight fell outside (0, 1]."""


class ConfigError(GpnetError):
    """Invalid or unknown configuration key/value (CLI exit code 2)."""


class TrainingFailure(GpnetError):
    """Numerical failure during a training run (CLI exit code 3).

    Carries the iteration index at which the run aborted.
    """

    def __init__(self, iteration, cause):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"training aborted at iteration {iteration}: {cause}")


class ParseError(GpnetError):
    """A data file failed to parse; carries the 1-based line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingValue(ParseError):
    """A data cell is missing or non-numeric."""

    def __init__(self, line, col, message="missing or non-numeric value"):
        self.col = col
        super().__init__(line, f"column {col}: {message}")


class EmptyFile(GpnetError):
    """A data file contains no usable rows."""
