from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest

from vidmem.content import best_match, gsscd
from vidmem.data import (
    load_embedding_sequence,
    load_flow_sequence,
    load_labels,
    load_latent_trajectory,
    load_manifest,
)
from vidmem.detection import aggregate, magnitude_series
from vidmem.evaluation import ScoredItem, auc
from vidmem.motion import NMFConfig, classify_sequence, ofs_k
from vidmem.rng import CounterRng
from vidmem.synth import (
    FixtureSpec,
    generate_content_fixture,
    generate_latent_fixture,
    generate_motion_fixture,
)


def _tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_rng_is_stateless_and_sliceable():
    rng = CounterRng(123)
    full = rng.uniforms(7, 64)
    assert np.array_equal(full[10:20], rng.uniforms(7, 10, offset=10))
    again = CounterRng(123).normals(9, 32)
    assert np.array_equal(again, CounterRng(123).normals(9, 32))
    assert not np.array_equal(again, CounterRng(124).normals(9, 32))
    # moments sanity for the documented Box-Muller variant
    z = rng.normals(11, 200_000)
    assert abs(float(z.mean())) < 0.01
    assert abs(float(z.std()) - 1.0) < 0.01


@pytest.mark.parametrize("kind", ["content", "motion", "latent"])
def test_fixture_determinism_byte_identical(tmp_path, kind):
    spec = FixtureSpec(
        seed=5, n_train=12, n_generated=10, planted_pairs=3, noise_sigma=0.01,
        frames=5, dim=32, height=8, width=8, steps=4,
    )
    gen = {
        "content": generate_content_fixture,
        "motion": generate_motion_fixture,
        "latent": generate_latent_fixture,
    }[kind]
    gen(spec, tmp_path / "a")
    gen(spec, tmp_path / "b")
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_content_fixture_zero_sigma_exact_copies(tmp_path):
    spec = FixtureSpec(seed=2, n_train=10, n_generated=8, planted_pairs=4,
                       noise_sigma=0.0, frames=4, dim=32)
    paths = generate_content_fixture(spec, tmp_path)
    train = {e.id: load_embedding_sequence(e.embedding_path, e.id)
             for e in load_manifest(paths.train_manifest)}
    gen = {e.id: load_embedding_sequence(e.embedding_path, e.id)
           for e in load_manifest(paths.gen_manifest)}
    for p in range(4):
        result = gsscd(gen[f"gen_{p:04d}"], train[f"train_{p:04d}"])
        assert result.score == pytest.approx(1.0, abs=1e-6)


def test_content_fixture_planted_recoverable_and_margins(tmp_path):
    spec = FixtureSpec(seed=3, n_train=40, n_generated=60, planted_pairs=10,
                       noise_sigma=0.01, frames=6, dim=64)
    paths = generate_content_fixture(spec, tmp_path)
    train = [load_embedding_sequence(e.embedding_path, e.id)
             for e in load_manifest(paths.train_manifest)]
    labels = load_labels(paths.labels)
    pos_scores, neg_scores = [], []
    for entry in load_manifest(paths.gen_manifest):
        seq = load_embedding_sequence(entry.embedding_path, entry.id)
        _, result = best_match(seq, train)
        (pos_scores if labels[entry.id] else neg_scores).append(result.score)
    assert min(pos_scores) >= 0.99
    assert max(neg_scores) < 0.4


def test_motion_fixture_planted_and_distractors(tmp_path):
    spec = FixtureSpec(seed=4, n_train=12, n_generated=14, planted_pairs=4,
                       noise_sigma=0.0, frames=7, height=12, width=12)
    paths = generate_motion_fixture(spec, tmp_path)
    cfg = NMFConfig()
    train = [load_flow_sequence(e.flow_path, e.id) for e in load_manifest(paths.train_manifest)]
    gen = [load_flow_sequence(e.flow_path, e.id) for e in load_manifest(paths.gen_manifest)]
    labels = load_labels(paths.labels)

    # planted pairs: exact copies, informative under NMF
    for p in range(4):
        got = ofs_k(gen[p], train[p], k=3, cfg=cfg, nmf_enabled=True)
        assert got.score == pytest.approx(1.0, abs=1e-6)
        assert labels[gen[p].video_id] == 1

    # the distractor cycle after the planted block: coincidental, panning, static, random
    panning_copy = gen[4 + 1]
    kinds = {c.kind for c in classify_sequence(panning_copy, cfg)}
    assert kinds == {"panning"}
    panning_train = train[4]
    with_nmf = ofs_k(panning_copy, panning_train, k=3, cfg=cfg, nmf_enabled=True)
    without = ofs_k(panning_copy, panning_train, k=3, cfg=cfg, nmf_enabled=False)
    assert with_nmf.score == 0.0 and with_nmf.gen_index == -1
    assert without.score == pytest.approx(1.0, abs=1e-6)
    assert labels[panning_copy.video_id] == 0

    static_copy = gen[4 + 2]
    kinds = {c.kind for c in classify_sequence(static_copy, cfg)}
    assert kinds == {"static"}
    assert labels[static_copy.video_id] == 0


def test_latent_fixture_separates_populations(tmp_path):
    spec = FixtureSpec(seed=6, n_train=20, n_generated=40, planted_pairs=20,
                       noise_sigma=0.0, frames=4, dim=2, height=8, width=8, steps=12)
    paths = generate_latent_fixture(spec, tmp_path)
    labels = load_labels(paths.labels)
    items_c, items_m = [], []
    for d in paths.trajectory_dirs:
        series = magnitude_series(load_latent_trajectory(d))
        c, m = aggregate(series, "all")
        items_c.append(ScoredItem(series.trajectory_id, c, labels[series.trajectory_id]))
        items_m.append(ScoredItem(series.trajectory_id, m, labels[series.trajectory_id]))
    assert auc(items_c) >= 0.95
    assert auc(items_m) >= 0.95


def test_fixture_spec_validation():
    with pytest.raises(ValueError, match="planted"):
        FixtureSpec(seed=0, n_train=2, n_generated=5, planted_pairs=3)
    with pytest.raises(ValueError, match="noise_sigma"):
        FixtureSpec(seed=0, noise_sigma=-0.1)


def test_motion_fixture_requires_distractor_sources(tmp_path):
    spec = FixtureSpec(seed=0, n_train=3, n_generated=8, planted_pairs=3, frames=5)
    with pytest.raises(ValueError, match="n_train"):
        generate_motion_fixture(spec, tmp_path)


def test_motion_fixture_requires_informative_sources(tmp_path):
    # no planted pairs and a train cycle too short to reach an informative item
    spec = FixtureSpec(seed=0, n_train=2, n_generated=4, planted_pairs=0, frames=5)
    with pytest.raises(ValueError, match="informative"):
        generate_motion_fixture(spec, tmp_path)


def test_motion_fixture_zero_planted_is_generable(tmp_path):
    spec = FixtureSpec(seed=0, n_train=6, n_generated=4, planted_pairs=0, frames=5)
    paths = generate_motion_fixture(spec, tmp_path)
    labels = load_labels(paths.labels)
    assert set(labels.values()) == {0}
