"""Exception hierarchy shared by every module."""


class ScriskError(Exception):
    """Base class for all package errors."""


class ParseError(ScriskError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(ScriskError):
    """Inconsistent data: conflicting sectors, stale proposals, broken invariants."""


class ExhaustionError(ScriskError):
    """No eligible swap pair found within the resample budget."""


class ConfigError(ScriskError):
    """Invalid run configuration."""
