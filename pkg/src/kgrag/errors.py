"""Exception hierarchy shared by every pipeline stage."""


class KgragError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(KgragError):
    """A record or file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(KgragError):
    """Inputs violate a documented precondition."""


class ConfigError(KgragError):
    """Configuration is missing, unknown or out of range."""


class TransportError(KgragError):
    """A chat-completion provider call failed (possibly after retries)."""


class EntityNotFound(KgragError, KeyError):
    """An entity name is not present in a knowledge graph."""
