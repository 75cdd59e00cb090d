"""Exception hierarchy shared by every module."""


class SBMLabError(Exception):
    """Base class for all errors raised by sbmlab."""


class ConfigError(SBMLabError, ValueError):
    """Invalid parameters or configuration."""


class DomainError(SBMLabError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class NumericError(SBMLabError, ArithmeticError):
    """A numerical procedure failed to reach its accuracy target.

    ``diagnostics`` carries whatever the failing routine knew at the time.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PreconditionError(SBMLabError, ValueError):
    """Inputs violate the hypotheses a check is meant to run under."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending or [])


class DiagnosticError(SBMLabError, ValueError):
    """Input data are inconsistent (for example a noisy, non-monotone table)."""
