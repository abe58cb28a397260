"""Exception types shared across the package.

The CLI maps these onto distinct exit codes; library code raises them
directly.  Plain ``ValueError``/``IndexError`` are still used for ordinary
argument mistakes (bad qubit index, mismatched vector length).
"""


class QRewindError(Exception):
    """Base class for package-specific failures."""


class ConfigError(QRewindError):
    """Invalid configuration: out-of-range sizes, unknown keys, bad presets."""


class DataError(QRewindError):
    """Malformed dataset or dataset file."""


class NumericError(QRewindError):
    """Numeric breakdown, e.g. an objective returning NaN."""
