"""Exception hierarchy and process exit codes shared across the package."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class FactorcastError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ConfigError(FactorcastError):
    """Invalid configuration: bad flag values, malformed config files."""

    exit_code = EXIT_CONFIG


class DataError(FactorcastError):
    """Invalid or corrupt data: file format problems, shape mismatches."""

    exit_code = EXIT_DATA


class NumericalError(FactorcastError):
    """Numerical failure: non-convergence, non-finite values in a computation."""

    exit_code = EXIT_NUMERICAL


# Data-file errors, one class per failure mode so callers can tell them apart.

class SeriesFileError(DataError):
    """Base class for series/checkpoint file format violations."""


class BadMagicError(SeriesFileError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(SeriesFileError):
    """File carries a format version this build does not understand."""


class UnsupportedDtypeError(SeriesFileError):
    """File payload dtype code is not little-endian float64."""


class PayloadSizeError(SeriesFileError):
    """Payload length disagrees with the header (truncated or padded file)."""


class HeaderInconsistencyError(SeriesFileError):
    """Header fields are mutually inconsistent (e.g. impossible dimensions)."""
