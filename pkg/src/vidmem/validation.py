"""Input validation helpers shared by the estimator layer."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import EmbeddingSequence, FlowSequence, LatentTrajectory, make_embedding_sequence


def check_embedding_sequences(X, *, allow_matrices: bool = True) -> list[EmbeddingSequence]:
    """Coerce input into a non-empty list of EmbeddingSequence.

    Accepts EmbeddingSequence objects or, when ``allow_matrices``, raw [N, D]
    arrays (normalized on the way in, ids synthesized from positions).
    """
    if isinstance(X, EmbeddingSequence):
        X = [X]
    items = list(X)
    if not items:
        raise ValueError("expected at least one embedding sequence")
    out: list[EmbeddingSequence] = []
    for pos, item in enumerate(items):
        if isinstance(item, EmbeddingSequence):
            out.append(item)
        elif allow_matrices and isinstance(item, np.ndarray):
            out.append(make_embedding_sequence(f"item_{pos:04d}", item))
        else:
            raise TypeError(
                f"expected EmbeddingSequence or [N, D] array, got {type(item).__name__}"
            )
    widths = {seq.width for seq in out}
    if len(widths) != 1:
        raise ValueError(f"inconsistent embedding widths: {sorted(widths)}")
    return out


def check_flow_sequences(X) -> list[FlowSequence]:
    if isinstance(X, FlowSequence):
        X = [X]
    items = list(X)
    if not items:
        raise ValueError("expected at least one flow sequence")
    for item in items:
        if not isinstance(item, FlowSequence):
            raise TypeError(f"expected FlowSequence, got {type(item).__name__}")
    shapes = {seq.spatial_shape for seq in items}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent flow spatial shapes: {sorted(shapes)}")
    return items


def check_trajectories(X) -> list[LatentTrajectory]:
    if isinstance(X, LatentTrajectory):
        X = [X]
    items = list(X)
    if not items:
        raise ValueError("expected at least one trajectory")
    for item in items:
        if not isinstance(item, LatentTrajectory):
            raise TypeError(f"expected LatentTrajectory, got {type(item).__name__}")
    return items
