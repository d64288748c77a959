"""Exception hierarchy shared by every ncmet module."""


class NcmetError(Exception):
    """Base class for all ncmet failures."""


class StructuralError(NcmetError, ValueError):
    """Element shapes or parents do not match an algebra."""


class DomainError(NcmetError, ValueError):
    """An input is outside the domain of an operation (non-Hermitian, log of 0, ...)."""


class ConditioningError(NcmetError, ArithmeticError):
    """An operation needing an inverse met a block below the singularity floor."""

    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ConfigurationError(NcmetError, ValueError):
    """A system or experiment was configured with inconsistent parameters."""


class UsageError(NcmetError, ValueError):
    """Operations were combined in an unsupported way."""
