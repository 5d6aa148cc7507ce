"""Exception types shared across the package."""


class MisseqError(Exception):
    """Base class for every error raised by this package."""


class ParseError(MisseqError):
    """An episode stream could not be parsed (reported with line number)."""


class SchemaError(MisseqError):
    """Parsed data violates the episode schema or an episode invariant."""


class ConfigError(MisseqError):
    """Invalid configuration, variable specs, or inconsistent experiment setup."""


class NumericError(MisseqError):
    """Training or evaluation produced non-finite values."""
