"""Exception types shared across the package."""


class AffcutError(Exception):
    """Base class for all affcut errors."""


class InputError(AffcutError, ValueError):
    """Caller-supplied data violates a documented precondition."""


class LogicError(AffcutError, RuntimeError):
    """An operation was applied to a state that cannot support it."""


class ContainerError(InputError):
    """An on-disk pyramid container is malformed."""
