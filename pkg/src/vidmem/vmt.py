"""Reader/writer for the VMT binary tensor interchange format.

Layout (all integers little-endian):

    bytes 0..3   magic, ASCII "VMT1"
    byte  4      format version, currently 1
    byte  5      dtype code, currently 0 = float32
    byte  6      ndim, 1 through 4
    next         ndim x u32 extents
    rest         prod(extents) x 4 bytes of IEEE-754 float32, row-major

Every multi-byte value is little-endian and the payload is written in C
(row-major) order, so a file is bit-exact across platforms. Reads validate
the header, the payload length, and reject NaN/Inf values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    BadExtentError,
    BadMagicError,
    BadNdimError,
    NonFiniteDataError,
    TrailingBytesError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

MAGIC = b"VMT1"
VERSION = 1
DTYPE_FLOAT32 = 0
MAX_NDIM = 4
_U32_MAX = 2**32 - 1


def write_tensor(t: np.ndarray, path: str | Path) -> None:
    """Serialize a float32 tensor to ``path`` in VMT format.

    ``t`` is converted to a C-contiguous float32 array first; its shape must
    have 1 to 4 dimensions, all extents positive and representable as u32.
    """
    view = np.asarray(t)
    if view.ndim < 1 or view.ndim > MAX_NDIM:
        raise BadNdimError(f"ndim must be 1..{MAX_NDIM}, got {view.ndim}")
    for extent in view.shape:
        if extent < 1:
            raise BadExtentError(f"extents must be positive, got shape {view.shape}")
        if extent > _U32_MAX:
            raise BadExtentError(f"extent {extent} does not fit in 32 bits")
    arr = np.ascontiguousarray(view, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteDataError("refusing to write NaN/Inf payload")

    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_FLOAT32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_tensor(path: str | Path) -> np.ndarray:
    """Read and validate a VMT file, returning a C-contiguous float32 array."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC):
        raise TruncatedPayloadError(f"{path}: file shorter than magic")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 7:
        raise TruncatedPayloadError(f"{path}: header truncated")
    version, dtype_code, ndim = struct.unpack("<BBB", blob[4:7])
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype code {dtype_code}")
    if ndim < 1 or ndim > MAX_NDIM:
        raise BadNdimError(f"{path}: ndim {ndim} outside 1..{MAX_NDIM}")

    dims_end = 7 + 4 * ndim
    if len(blob) < dims_end:
        raise TruncatedPayloadError(f"{path}: extents truncated")
    dims = struct.unpack(f"<{ndim}I", blob[7:dims_end])
    if any(d < 1 for d in dims):
        raise BadExtentError(f"{path}: zero extent in {dims}")

    count = 1
    for d in dims:
        count *= d
    expected = dims_end + 4 * count
    if len(blob) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(blob) - dims_end} bytes, expected {4 * count}"
        )
    if len(blob) > expected:
        raise TrailingBytesError(f"{path}: {len(blob) - expected} trailing bytes")

    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=dims_end)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteDataError(f"{path}: payload contains NaN or Inf")
    return arr.astype(np.float32, copy=True).reshape(dims)
