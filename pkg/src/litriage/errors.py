"""Exception hierarchy shared across the toolkit.

Everything raised on bad input derives from ``TriageError`` so callers
(and the command line) can separate input problems from genuine bugs.
"""


class TriageError(Exception):
    pass


class ValidationError(TriageError, ValueError):
    """Input violates a documented invariant."""


class ParseError(ValidationError):
    """Malformed file contents; message carries the location."""


class FormatError(ParseError):
    """Embedding or checkpoint file does not match its declared layout."""


class ReferentialError(ValidationError):
    """A record points at an id that was never declared."""


class LookupFailure(TriageError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(ValidationError):
    pass


class DataError(ValidationError):
    """Training data unusable as given (e.g. a single label)."""


class CompatibilityError(ValidationError):
    """Checkpoint was built against different vocabulary or embeddings."""


class ShapeError(ValidationError):
    pass


class StateError(TriageError, RuntimeError):
    """Operation called out of order (e.g. backward before forward)."""
