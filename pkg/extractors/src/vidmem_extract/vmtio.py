"""Writers for the vidmem interchange formats.

This package talks to the audit engine only through its file formats, so
the VMT layout is implemented here independently: magic "VMT1", version 1,
dtype code 0 (float32), ndim byte, little-endian u32 extents, row-major
little-endian float32 payload.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VMT1"
VERSION = 1
DTYPE_FLOAT32 = 0


def write_vmt(arr: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim < 1 or arr.ndim > 4:
        raise ValueError(f"ndim must be 1..4, got {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("payload must be finite")
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_FLOAT32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f4", copy=False).tobytes(order="C"))


def write_manifest(path: str | Path, entries: list[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def write_id_caption_csv(path: str | Path, rows: list[tuple[str, str]]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "caption"])
        writer.writerows(rows)
