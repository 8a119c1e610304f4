"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ToolkitError):
    """A binary or image file does not match the expected layout."""


class DataError(ToolkitError):
    """File layout is fine but a value is out of domain (NaN, bad score, ...)."""


class ParseError(ToolkitError):
    """A text file failed to parse; message carries the line number."""


class ConfigError(ToolkitError):
    """Invalid configuration value."""


class UsageError(ToolkitError):
    """API precondition violated by the caller."""
