"""Dataset duplication analysis and duplication-prone prompt curation.

The hot path is an exact all-pairs cosine top-k over dataset feature
vectors, computed in [block_rows x block_cols] tiles so the full gram
matrix never materializes. Neighbor selection is a total order (score
descending, then id ascending), so results are independent of tiling and
thread scheduling.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetManifest, normalize_rows
from .exceptions import DataError
from .vmt import read_tensor

DEFAULT_K = 50
DEFAULT_TAU = 0.95
DEFAULT_BLOCK = 1024


@dataclass(frozen=True)
class FeatureIndex:
    ids: tuple[str, ...]
    captions: tuple[str | None, ...]
    features: np.ndarray  # [N, D] float32, rows unit-norm

    def __post_init__(self) -> None:
        n = len(self.ids)
        if len(self.captions) != n or self.features.shape[0] != n:
            raise DataError("ids, captions and feature rows must align")
        if len(set(self.ids)) != n:
            raise DataError("duplicate ids in feature index")


@dataclass(frozen=True)
class TopKNeighbors:
    """Exact top-k cosine neighbors per item, self excluded, sorted descending."""

    ids: tuple[str, ...]
    neighbors: tuple[tuple[tuple[str, float], ...], ...]
    k: int


@dataclass(frozen=True)
class DuplicationItem:
    id: str
    neighbors: tuple[tuple[str, float], ...]
    duplication_count: int


@dataclass(frozen=True)
class DuplicationReport:
    items: tuple[DuplicationItem, ...]
    tau: float
    k: int


@dataclass(frozen=True)
class PromptEntry:
    caption: str
    source_video_id: str


@dataclass(frozen=True)
class PromptDataset:
    entries: tuple[PromptEntry, ...]
    requested: int

    @property
    def shortfall(self) -> int:
        return max(0, self.requested - len(self.entries))


def make_feature_index(
    ids: list[str], captions: list[str | None], features: np.ndarray
) -> FeatureIndex:
    arr = np.asarray(features, dtype=np.float32)
    if arr.ndim != 2:
        raise DataError(f"features must be [N, D], got shape {arr.shape}")
    return FeatureIndex(tuple(ids), tuple(captions), normalize_rows(arr, what="feature"))


def load_feature_index(manifest: DatasetManifest) -> FeatureIndex:
    """Assemble a FeatureIndex from manifest entries carrying feature_path."""
    ids: list[str] = []
    captions: list[str | None] = []
    rows: list[np.ndarray] = []
    for entry in manifest:
        if entry.feature_path is None:
            raise DataError(f"manifest entry {entry.id!r} lacks feature_path")
        vec = read_tensor(entry.feature_path)
        if vec.ndim == 2 and vec.shape[0] == 1:
            vec = vec[0]
        if vec.ndim != 1:
            raise DataError(
                f"{entry.id}: feature file must be a vector, got shape {vec.shape}"
            )
        ids.append(entry.id)
        captions.append(entry.caption)
        rows.append(vec)
    if not rows:
        raise DataError("manifest contains no entries")
    widths = {r.shape[0] for r in rows}
    if len(widths) != 1:
        raise DataError(f"inconsistent feature widths: {sorted(widths)}")
    return make_feature_index(ids, captions, np.stack(rows))


def load_feature_index_from_matrix(
    matrix_path: str | Path, sidecar_path: str | Path
) -> FeatureIndex:
    """Alternative input: one [N, D] tensor plus an id,caption sidecar CSV."""
    matrix = read_tensor(matrix_path)
    if matrix.ndim != 2:
        raise DataError(f"{matrix_path}: expected [N, D], got shape {matrix.shape}")
    ids: list[str] = []
    captions: list[str | None] = []
    with Path(sidecar_path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "caption"]:
            raise DataError(f"{sidecar_path}: expected header 'id,caption'")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{sidecar_path}: expected 2 columns, got {row!r}")
            ids.append(row[0])
            captions.append(row[1] if row[1] != "" else None)
    if len(ids) != matrix.shape[0]:
        raise DataError(
            f"sidecar has {len(ids)} rows but matrix has {matrix.shape[0]}"
        )
    return make_feature_index(ids, captions, matrix)


def _descending_keys(scores: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    """Encode (score desc, id-rank asc) as one uint64 key per entry.

    The float32 bit pattern is mapped to an order-preserving uint32, inverted
    for descending order, and packed above the 24-bit id rank, so a single
    integer argsort yields the exact deterministic neighbor order.
    """
    u = scores.astype(np.float32).view(np.uint32)
    monotone = np.where(u & 0x80000000, ~u, u | 0x80000000)
    inverted = (~monotone).astype(np.uint64)
    return (inverted << np.uint64(24)) | ranks.astype(np.uint64)


def topk_neighbors(
    index: FeatureIndex,
    k: int = DEFAULT_K,
    block_rows: int = DEFAULT_BLOCK,
    block_cols: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> TopKNeighbors:
    """Exact top-k cosine neighbors per item via blocked tile products."""
    n = len(index.ids)
    if n < 2:
        raise ValueError("need at least 2 items")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k = {k} must be smaller than the item count {n}")
    if block_rows < 1 or block_cols < 1:
        raise ValueError("block sizes must be positive")
    if n > (1 << 24):
        raise ValueError("more than 2^24 items not supported")

    X = index.features
    # rank of each position under ascending id order; the tie-break key
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[np.argsort(np.array(index.ids))] = np.arange(n)

    neigh_pos = np.empty((n, k), dtype=np.int64)
    neigh_score = np.empty((n, k), dtype=np.float32)

    def scan_rows(r0: int) -> None:
        r1 = min(r0 + block_rows, n)
        rows = X[r0:r1]
        buf_key = np.full((r1 - r0, k), np.iinfo(np.uint64).max, dtype=np.uint64)
        buf_pos = np.full((r1 - r0, k), -1, dtype=np.int64)
        buf_score = np.full((r1 - r0, k), -np.inf, dtype=np.float32)
        for c0 in range(0, n, block_cols):
            c1 = min(c0 + block_cols, n)
            tile = rows @ X[c0:c1].T  # [r, c]
            # self-similarity is not a neighbor
            overlap_lo = max(r0, c0)
            overlap_hi = min(r1, c1)
            if overlap_lo < overlap_hi:
                diag = np.arange(overlap_lo, overlap_hi)
                tile[diag - r0, diag - c0] = -np.inf
            tile_key = _descending_keys(tile, id_rank[c0:c1])
            comb_key = np.concatenate([buf_key, tile_key], axis=1)
            comb_pos = np.concatenate(
                [buf_pos, np.broadcast_to(np.arange(c0, c1), tile.shape)], axis=1
            )
            comb_score = np.concatenate([buf_score, tile], axis=1)
            order = np.argsort(comb_key, axis=1)[:, :k]
            buf_key = np.take_along_axis(comb_key, order, axis=1)
            buf_pos = np.take_along_axis(comb_pos, order, axis=1)
            buf_score = np.take_along_axis(comb_score, order, axis=1)
        neigh_pos[r0:r1] = buf_pos
        neigh_score[r0:r1] = buf_score

    starts = list(range(0, n, block_rows))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(scan_rows, starts))
    else:
        for r0 in starts:
            scan_rows(r0)

    neighbors = tuple(
        tuple(
            (index.ids[int(p)], float(s))
            for p, s in zip(neigh_pos[i], neigh_score[i])
        )
        for i in range(n)
    )
    return TopKNeighbors(index.ids, neighbors, k)


def duplication_counts(precursor: TopKNeighbors, tau_dup: float = DEFAULT_TAU) -> DuplicationReport:
    """Count neighbors at or above tau_dup per item.

    If an item's k-th neighbor is itself above the threshold, the true count
    may exceed k; that is reported as a warning rather than an error.
    """
    if not (0.0 < tau_dup <= 1.0):
        raise ValueError(f"tau_dup must be in (0, 1], got {tau_dup}")
    clipped = 0
    items = []
    for item_id, neigh in zip(precursor.ids, precursor.neighbors):
        count = sum(1 for _, s in neigh if s >= tau_dup)
        if count == len(neigh) and neigh:
            clipped += 1
        items.append(DuplicationItem(item_id, neigh, count))
    if clipped:
        warnings.warn(
            f"duplication counts may be clipped at k = {precursor.k} for"
            f" {clipped} item(s); their k-th neighbor is already >= tau",
            stacklevel=2,
        )
    return DuplicationReport(tuple(items), tau_dup, precursor.k)


def curate_prompts(
    index: FeatureIndex, report: DuplicationReport, limit: int
) -> PromptDataset:
    """First ``limit`` unique captions from the most duplicated items.

    Items are walked in descending duplication_count with manifest position
    breaking ties; captions compare after trimming surrounding whitespace;
    items lacking captions are skipped. May return fewer than ``limit``.
    """
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    caption_of = {item_id: cap for item_id, cap in zip(index.ids, index.captions)}
    order = sorted(
        range(len(report.items)), key=lambda pos: (-report.items[pos].duplication_count, pos)
    )
    seen: set[str] = set()
    entries: list[PromptEntry] = []
    for pos in order:
        item = report.items[pos]
        caption = caption_of.get(item.id)
        if caption is None:
            continue
        trimmed = caption.strip()
        if not trimmed or trimmed in seen:
            continue
        seen.add(trimmed)
        entries.append(PromptEntry(trimmed, item.id))
        if len(entries) == limit:
            break
    return PromptDataset(tuple(entries), limit)


def write_prompt_csv(dataset: PromptDataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["caption", "source_video_id"])
        for entry in dataset.entries:
            writer.writerow([entry.caption, entry.source_video_id])
