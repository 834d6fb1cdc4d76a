from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from vidmem.content import (
    EmbeddingIndex,
    best_match,
    cosine,
    frame_similarity_matrix,
    gsscd,
    vsscd,
)
from vidmem.data import make_embedding_sequence


def test_cosine_identical_unit_vectors():
    assert cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)


def test_cosine_hand_dot_product():
    assert cosine(np.array([1.0, 0.0]), np.array([0.6, 0.8])) == pytest.approx(0.6, abs=1e-9)


def test_cosine_width_mismatch():
    with pytest.raises(ValueError, match="width"):
        cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))


def test_cosine_near_zero_norm():
    with pytest.raises(ValueError, match="norm"):
        cosine(np.array([0.0, 0.0]), np.array([1.0, 0.0]))


def test_similarity_matrix_self_orthonormal(emb):
    seq = emb("v", [[1, 0], [0, 1]])
    m = frame_similarity_matrix(seq, seq).values
    assert np.allclose(m, np.eye(2), atol=1e-6)


def test_similarity_matrix_derived_six_pairs(emb):
    gen = emb("g", [[1, 0], [0, 1]])
    train = emb("t", [[0.6, 0.8], [1, 0], [0, 1]])
    expected = np.array([[0.6, 1.0, 0.0], [0.8, 0.0, 1.0]])
    assert np.allclose(frame_similarity_matrix(gen, train).values, expected, atol=1e-6)


def test_similarity_matrix_single_frame(emb):
    gen = emb("g", [[1, 0]])
    train = emb("t", [[1, 0], [0, 1], [0.6, 0.8], [-1, 0]])
    assert frame_similarity_matrix(gen, train).values.shape == (1, 4)


def test_gsscd_identical_video(emb):
    seq = emb("v", np.random.default_rng(0).standard_normal((5, 8)))
    assert gsscd(seq, seq).score == pytest.approx(1.0, abs=1e-6)


def test_gsscd_derived_argmax(emb):
    gen = emb("g", [[1, 0], [0, 1]])
    train = emb("t", [[0.6, 0.8], [1, 0], [0, 1]])
    result = gsscd(gen, train)
    assert result.score == pytest.approx(1.0, abs=1e-6)
    assert (result.gen_index, result.train_index) == (0, 1)
    assert result.metric == "gsscd"


def test_gsscd_video_vs_planted_image(emb):
    rng = np.random.default_rng(1)
    rows = np.eye(8)[:4] + 0.01 * rng.standard_normal((4, 8))
    gen = emb("g", rows)
    image = emb("img", gen.embeddings[3:4])
    result = gsscd(gen, image)
    assert result.score == pytest.approx(1.0, abs=1e-6)
    assert (result.gen_index, result.train_index) == (3, 0)


def test_vsscd_identical(emb):
    seq = emb("v", np.random.default_rng(2).standard_normal((4, 6)))
    assert vsscd(seq, seq) == pytest.approx(1.0, abs=1e-9)


def test_vsscd_derived_concatenated_dot(emb):
    gen = emb("g", [[1, 0], [0, 1]])
    train = emb("t", [[0.6, 0.8], [1, 0]])
    assert vsscd(gen, train) == pytest.approx(0.3, abs=1e-6)


def test_vsscd_frame_count_mismatch(emb):
    with pytest.raises(ValueError, match="frame-count"):
        vsscd(emb("g", [[1, 0], [0, 1]]), emb("t", [[1, 0], [0, 1], [0.6, 0.8]]))


def test_best_match_planted_copy(emb):
    rng = np.random.default_rng(3)
    gen = emb("g", rng.standard_normal((4, 16)))
    index = [emb(f"t{i}", rng.standard_normal((5, 16))) for i in range(10)]
    index[7] = emb("t7", gen.embeddings.copy())
    train_id, result = best_match(gen, index)
    assert train_id == "t7"
    assert result.score == pytest.approx(1.0, abs=1e-6)


def test_best_match_against_per_item_loop():
    rng = np.random.default_rng(4)
    gen_rows = rng.standard_normal((6, 12)).astype(np.float32)
    from vidmem.data import make_embedding_sequence

    gen = make_embedding_sequence("g", gen_rows)
    index = [
        make_embedding_sequence(f"t{i:02d}", rng.standard_normal((rng.integers(1, 7), 12)))
        for i in range(50)
    ]
    train_id, result = best_match(gen, index)

    best = (-np.inf, None)
    for seq in index:
        score, _, _ = oracles.brute_gsscd(gen.embeddings, seq.embeddings)
        if score > best[0]:
            best = (score, seq.video_id)
    assert train_id == best[1]
    assert result.score == pytest.approx(best[0], abs=1e-6)


def test_best_match_tie_lowest_position(emb):
    gen = emb("g", [[1.0, 0.0]])
    dup = [[1.0, 0.0], [0.0, 1.0]]
    index = [emb("zz", [[0.0, 1.0]]), emb("mm", dup), emb("aa", dup)]
    train_id, result = best_match(gen, index)
    assert train_id == "mm"  # position beats id string
    assert (result.gen_index, result.train_index) == (0, 0)


def test_best_match_block_size_invariance(emb):
    rng = np.random.default_rng(5)
    gen = emb("g", rng.standard_normal((3, 8)))
    index = [emb(f"t{i}", rng.standard_normal((4, 8))) for i in range(9)]
    results = [best_match(gen, index, block_size=bs) for bs in (1, 2, 5, 7, 1000)]
    ids = {r[0] for r in results}
    assert len(ids) == 1
    scores = {r[1].score for r in results}
    assert max(scores) - min(scores) <= 1e-6
    assert len({(r[1].gen_index, r[1].train_index) for r in results}) == 1


def test_best_match_empty_index(emb):
    with pytest.raises(ValueError, match="empty"):
        best_match(emb("g", [[1, 0]]), [])


def test_index_width_mismatch(emb):
    with pytest.raises(ValueError, match="width"):
        EmbeddingIndex([emb("a", [[1, 0]]), emb("b", [[1, 0, 0]])])


def test_gsscd_symmetry(emb):
    rng = np.random.default_rng(6)
    for _ in range(20):
        a = emb("a", rng.standard_normal((rng.integers(1, 6), 8)))
        b = emb("b", rng.standard_normal((rng.integers(1, 6), 8)))
        assert gsscd(a, b).score == pytest.approx(gsscd(b, a).score, abs=1e-7)


def test_gsscd_frame_permutation_invariance(emb):
    rng = np.random.default_rng(7)
    a_rows = rng.standard_normal((5, 8)).astype(np.float32)
    b_rows = rng.standard_normal((4, 8)).astype(np.float32)
    a, b = emb("a", a_rows), emb("b", b_rows)
    base = gsscd(a, b)
    perm = rng.permutation(5)
    shuffled = emb("a2", a_rows[perm])
    permuted = gsscd(shuffled, b)
    assert permuted.score == pytest.approx(base.score, abs=1e-7)
    assert perm[permuted.gen_index] == base.gen_index
    assert permuted.train_index == base.train_index


def test_gsscd_dominates_vsscd(emb):
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        a = emb("a", rng.standard_normal((n, 10)))
        b = emb("b", rng.standard_normal((n, 10)))
        # equality holds at n = 1, where the two float paths differ by ~1e-7
        assert gsscd(a, b).score >= vsscd(a, b) - 1e-6


@settings(max_examples=50, deadline=None)
@given(
    n1=st.integers(1, 6),
    n2=st.integers(1, 6),
    d=st.integers(2, 12),
    seed=st.integers(0, 2**31),
)
def test_gsscd_properties_hold_for_random_inputs(n1, n2, d, seed):
    rng = np.random.default_rng(seed)
    a = make_embedding_sequence("a", rng.standard_normal((n1, d)))
    b = make_embedding_sequence("b", rng.standard_normal((n2, d)))
    forward = gsscd(a, b)
    assert forward.score <= 1.0 + 1e-6
    assert 0 <= forward.gen_index < n1 and 0 <= forward.train_index < n2
    assert forward.score == pytest.approx(gsscd(b, a).score, abs=1e-7)
    assert gsscd(a, a).score == pytest.approx(1.0, abs=1e-6)
    matrix = frame_similarity_matrix(a, b).values
    assert forward.score == matrix[forward.gen_index, forward.train_index]


def test_gsscd_matches_brute_force_oracle(emb):
    rng = np.random.default_rng(9)
    for _ in range(50):
        width = int(rng.integers(2, 17))
        a = emb("a", rng.standard_normal((rng.integers(1, 9), width)))
        b = emb("b", rng.standard_normal((rng.integers(1, 9), width)))
        got = gsscd(a, b)
        want_score, want_i, want_j = oracles.brute_gsscd(a.embeddings, b.embeddings)
        assert got.score == pytest.approx(want_score, abs=1e-6)
        assert (got.gen_index, got.train_index) == (want_i, want_j)
