"""Content-memorization similarity over per-frame copy-detection embeddings.

A generated video is content-memorized when any single generated frame
replicates a training frame (or a training image, the single-frame case).
The score for a pair of videos is therefore the maximum cosine similarity
over all frame pairs; the baseline video-level score is the cosine of the
two concatenated embedding vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import EmbeddingSequence

METRIC_GSSCD = "gsscd"
METRIC_OFS = "ofs"

DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SimilarityResult:
    """A similarity score together with the frame pair that attained it."""

    score: float
    gen_index: int
    train_index: int
    metric: str


@dataclass(frozen=True)
class FrameSimilarityMatrix:
    values: np.ndarray  # [N1, N2], entry (i, j) = cosine of frame embeddings


def cosine(a: np.ndarray, b: np.ndarray, *, min_norm: float = 1e-8) -> float:
    """Cosine similarity of two 1-D vectors of equal width."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"width mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < min_norm or nb < min_norm:
        raise ValueError(f"near-zero norm: {na:g}, {nb:g}")
    return float(np.dot(a, b) / (na * nb))


def _check_widths(gen: EmbeddingSequence, train: EmbeddingSequence) -> None:
    if gen.width != train.width:
        raise ValueError(
            f"embedding width mismatch: {gen.video_id} has {gen.width},"
            f" {train.video_id} has {train.width}"
        )


def frame_similarity_matrix(
    gen: EmbeddingSequence, train: EmbeddingSequence
) -> FrameSimilarityMatrix:
    """All-pairs frame cosines; rows are generated frames, columns training frames."""
    _check_widths(gen, train)
    # rows are unit-norm by construction, so the cosine is a plain dot product
    return FrameSimilarityMatrix(gen.embeddings @ train.embeddings.T)


def _rowmajor_argmax(matrix: np.ndarray) -> tuple[float, int, int]:
    flat = int(np.argmax(matrix))
    i, j = divmod(flat, matrix.shape[1])
    return float(matrix[i, j]), i, j


def gsscd(gen: EmbeddingSequence, train: EmbeddingSequence) -> SimilarityResult:
    """Maximum frame-pair cosine; ties resolve to the first pair in row-major order."""
    matrix = frame_similarity_matrix(gen, train).values
    score, i, j = _rowmajor_argmax(matrix)
    return SimilarityResult(score, i, j, METRIC_GSSCD)


def vsscd(gen: EmbeddingSequence, train: EmbeddingSequence) -> float:
    """Cosine of the concatenated per-frame embeddings (video-level baseline).

    Concatenations of different frame counts have incomparable widths, so
    unequal counts are rejected rather than silently truncated.
    """
    _check_widths(gen, train)
    if gen.n_frames != train.n_frames:
        raise ValueError(
            f"frame-count mismatch: {gen.video_id} has {gen.n_frames},"
            f" {train.video_id} has {train.n_frames}"
        )
    return cosine(gen.embeddings.ravel(), train.embeddings.ravel())


class EmbeddingIndex:
    """Training-side embeddings stacked into one matrix for blocked search."""

    def __init__(self, sequences: Iterable[EmbeddingSequence]):
        sequences = list(sequences)
        if not sequences:
            raise ValueError("empty index")
        width = sequences[0].width
        for seq in sequences:
            if seq.width != width:
                raise ValueError(
                    f"embedding width mismatch: {seq.video_id} has {seq.width},"
                    f" expected {width}"
                )
        self.ids: tuple[str, ...] = tuple(seq.video_id for seq in sequences)
        self.frames: np.ndarray = np.concatenate([seq.embeddings for seq in sequences], axis=0)
        counts = [seq.n_frames for seq in sequences]
        self.offsets: np.ndarray = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def width(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def prepare_embedding_index(
    index: Sequence[EmbeddingSequence] | EmbeddingIndex,
) -> EmbeddingIndex:
    if isinstance(index, EmbeddingIndex):
        return index
    return EmbeddingIndex(index)


def best_match(
    gen: EmbeddingSequence,
    index: Sequence[EmbeddingSequence] | EmbeddingIndex,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> tuple[str, SimilarityResult]:
    """Training item with the highest GSSCD against ``gen``.

    The similarity matrix is never materialized beyond ``block_size`` training
    frames at a time. Ties across items break to the lowest manifest position;
    ties within an item to the first frame pair in row-major order.
    """
    if block_size < 1:
        raise ValueError("block_size must be positive")
    prepared = prepare_embedding_index(index)
    if gen.width != prepared.width:
        raise ValueError(
            f"embedding width mismatch: {gen.video_id} has {gen.width},"
            f" index has {prepared.width}"
        )

    G = gen.embeddings
    offsets = prepared.offsets
    total = int(offsets[-1])
    # per item: (score, gen_index, train_index), merged lexicographically
    best: dict[int, tuple[float, int, int]] = {}

    for start in range(0, total, block_size):
        stop = min(start + block_size, total)
        S = G @ prepared.frames[start:stop].T
        first = int(np.searchsorted(offsets, start, side="right")) - 1
        last = int(np.searchsorted(offsets, stop, side="left"))
        for pos in range(first, last):
            a = max(int(offsets[pos]), start)
            b = min(int(offsets[pos + 1]), stop)
            sub = S[:, a - start : b - start]
            score, i, j_local = _rowmajor_argmax(sub)
            j = a - int(offsets[pos]) + j_local
            cur = best.get(pos)
            if cur is None or (-score, i, j) < (-cur[0], cur[1], cur[2]):
                best[pos] = (score, i, j)

    winner_pos = min(best, key=lambda pos: (-best[pos][0], pos))
    score, i, j = best[winner_pos]
    return prepared.ids[winner_pos], SimilarityResult(score, i, j, METRIC_GSSCD)
