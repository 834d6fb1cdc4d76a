from __future__ import annotations

import numpy as np
import pytest

from vidmem.data import make_embedding_sequence, make_flow_sequence


@pytest.fixture
def emb():
    def build(video_id, rows):
        return make_embedding_sequence(video_id, np.asarray(rows, dtype=np.float32))

    return build


@pytest.fixture
def flows():
    def build(video_id, arr):
        return make_flow_sequence(video_id, np.asarray(arr, dtype=np.float32))

    return build


@pytest.fixture
def single_pixel_flows(flows):
    """FlowSequence from a list of (x, y) vectors, one pixel per field."""

    def build(video_id, vectors):
        arr = np.array([[[[vx]], [[vy]]] for vx, vy in vectors], dtype=np.float32)
        return flows(video_id, arr)

    return build
