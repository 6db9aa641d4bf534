"""Exception hierarchy shared by all linfest modules."""


class LinfError(Exception):
    """Base class for every error raised by linfest."""


class ParameterError(LinfError, ValueError):
    """Invalid or inconsistent parameters (bad prior, length mismatch, ...)."""


class DomainError(LinfError, ValueError):
    """A quantity left the domain where the operation is defined."""


class DegeneratePosteriorError(LinfError, ArithmeticError):
    """Every posterior mass underflowed; the integration grid missed the posterior."""


class NumericError(LinfError, ArithmeticError):
    """Non-finite value inside an objective evaluation."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DivergenceError(LinfError, RuntimeError):
    """GAMP residual blew up; ``trace`` holds the per-iteration history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ConfigError(LinfError, ValueError):
    """Experiment configuration rejected before any trial ran."""


class CsvParseError(LinfError, ValueError):
    """Malformed trial CSV; ``line`` is the 1-based offending line."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
