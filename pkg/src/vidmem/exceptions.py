"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, anything else -> 4.
"""

from __future__ import annotations


class VidmemError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(VidmemError):
    """Invalid configuration: bad flag values, unknown config keys, k vs data mismatches."""


class DataError(VidmemError):
    """Invalid or unreadable input data."""


class ManifestError(DataError):
    """Malformed manifest: duplicate ids, bad JSON lines, dangling paths."""


class LabelFileError(DataError):
    """Malformed label CSV."""


class VMTFormatError(DataError):
    """Base class for tensor-file format violations."""


class BadMagicError(VMTFormatError):
    pass


class UnsupportedVersionError(VMTFormatError):
    pass


class UnsupportedDtypeError(VMTFormatError):
    pass


class BadNdimError(VMTFormatError):
    pass


class BadExtentError(VMTFormatError):
    """Zero extent on read, or an extent that does not fit in 32 bits on write."""


class TruncatedPayloadError(VMTFormatError):
    pass


class TrailingBytesError(VMTFormatError):
    pass


class NonFiniteDataError(VMTFormatError):
    """Payload contains NaN or Inf."""
