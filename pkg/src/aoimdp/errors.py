"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A configuration key is unknown, missing, or violates its constraint."""


class StateError(RuntimeError):
    """An object was used in a state that does not allow the call."""


class UnsupportedOperation(DomainError):
    """The operation is not defined for this kind of object."""
