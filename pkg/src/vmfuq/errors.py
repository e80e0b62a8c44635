"""Exception hierarchy shared by every module."""


class UQError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UQError, ValueError):
    """An argument lies outside the domain of the function."""


class ZeroVectorError(DomainError):
    """A vector that must be normalized has zero (or non-finite) norm."""


class DimensionMismatchError(DomainError):
    """Inputs that must share a dimension do not."""


class DegenerateInputError(DomainError):
    """The input is valid but the requested quantity is undefined for it."""


class InsufficientSamplesError(DegenerateInputError):
    """Too few samples to fit the requested model."""


class NonFiniteError(DomainError):
    """A NaN or infinity appeared where a finite value is required."""


class BackendError(UQError):
    """An external backend failed."""


class BackendUnreachableError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


class AuthError(BackendError):
    pass


class GenerationRefusedError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class BudgetExceededError(BackendError):
    """The per-run request budget is exhausted."""


class MissingVideoError(BackendError):
    pass


class PipelineError(UQError):
    """The uncertainty pipeline could not produce a report."""


class ManifestError(UQError):
    """A task manifest is malformed."""


class DuplicateTaskError(ManifestError):
    pass


class MissingAccuracyError(UQError):
    """Some tasks have no accuracy value for the requested metric."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"no accuracy for task(s): {', '.join(self.missing)}")


class ConfigError(UQError):
    pass
