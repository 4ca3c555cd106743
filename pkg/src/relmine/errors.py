"""Exception types shared across the package."""


class RelmineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RelmineError):
    """Bad configuration, bad preconditions, or malformed user input."""


class FormatError(ValidationError):
    """A data file violated its declared format. Message carries context
    such as the offending line number."""
