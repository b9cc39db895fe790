"""Exception types shared across the package."""


class RadlapError(Exception):
    """Base class for all package errors."""


class DomainError(RadlapError, ValueError):
    """A domain description violates a validation rule.

    The offending field name is kept on ``field`` so the CLI can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainEmptyError(DomainError):
    pass


class DomainMismatchError(RadlapError, ValueError):
    """Two operands live on different domains."""


class ContractViolation(RadlapError):
    """An operator failed a structural check (symmetry, definiteness)."""


class EvaluationError(RadlapError, ValueError):
    """A spectral function produced a non-finite value."""


class FitError(RadlapError, ValueError):
    pass


class PartitionError(RadlapError, ValueError):
    pass


class NodalError(RadlapError, ValueError):
    pass
