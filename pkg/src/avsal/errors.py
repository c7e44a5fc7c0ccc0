"""Exception types shared across the package.

The CLI maps these onto exit codes: anything deriving from ValidationError
exits 1 (bad inputs / bad config), everything else that escapes exits 2.
"""


class ValidationError(ValueError):
    """Base class for errors caused by invalid inputs or configuration."""


class DimensionError(ValidationError):
    """Shape mismatch between operands; message names both shapes."""


class ConfigError(ValidationError):
    """Invalid or inconsistent configuration values."""


class InputError(ValidationError):
    """Invalid data fed to a pipeline stage (files, waveforms, CSV rows...)."""


class UsageError(RuntimeError):
    """An API was called in a way its contract forbids."""
