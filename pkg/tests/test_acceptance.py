"""Acceptance gate: one test per criterion, at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to get one pass/fail line
per criterion.
"""

from __future__ import annotations

import json
import struct
import time

import numpy as np
import pytest
from click.testing import CliRunner

import oracles
from vidmem.cli import main as cli_main
from vidmem.content import gsscd
from vidmem.data import (
    LatentTrajectory,
    TrajectoryStep,
    load_flow_sequence,
    load_labels,
    load_latent_trajectory,
    load_manifest,
    make_embedding_sequence,
    make_flow_sequence,
)
from vidmem.dedup import duplication_counts, make_feature_index, topk_neighbors
from vidmem.detection import aggregate, content_magnitude, magnitude_series, motion_magnitude
from vidmem.evaluation import ScoredItem, auc, f1_at
from vidmem.exceptions import (
    BadMagicError,
    BadNdimError,
    NonFiniteDataError,
    TruncatedPayloadError,
)
from vidmem.motion import NMFConfig, classify_flow_pair, ofs_batch, ofs_k, prepare_flow_index
from vidmem.synth import FixtureSpec, generate_latent_fixture, generate_motion_fixture
from vidmem.vmt import read_tensor, write_tensor

CFG = NMFConfig()


def _ok(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_gsscd_oracle_equivalence():
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    for _ in range(200):
        width = int(rng.integers(2, 17))
        a = make_embedding_sequence("a", rng.standard_normal((rng.integers(1, 9), width)))
        b = make_embedding_sequence("b", rng.standard_normal((rng.integers(1, 9), width)))
        got = gsscd(a, b)
        want_score, want_i, want_j = oracles.brute_gsscd(a.embeddings, b.embeddings)
        assert abs(got.score - want_score) <= 1e-6
        assert (got.gen_index, got.train_index) == (want_i, want_j)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"200 instances took {elapsed:.3f}s"
    _ok(f"GSSCD oracle equivalence, 200 instances in {elapsed:.3f}s")


def _random_flow_instance(rng):
    m1, m2 = int(rng.integers(2, 7)), int(rng.integers(2, 7))
    h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
    k = int(rng.integers(1, min(m1, m2, 4) + 1))
    scale_g = rng.choice([0.05, 0.8, 3.0], size=(m1, 1, 1, 1))
    scale_t = rng.choice([0.05, 0.8, 3.0], size=(m2, 1, 1, 1))
    fg = make_flow_sequence("g", (scale_g * rng.standard_normal((m1, 2, h, w))).astype(np.float32))
    ft = make_flow_sequence("t", (scale_t * rng.standard_normal((m2, 2, h, w))).astype(np.float32))
    return fg, ft, k


def test_ofs_oracle_equivalence():
    rng = np.random.default_rng(1002)
    for trial in range(200):
        fg, ft, k = _random_flow_instance(rng)
        for nmf in (False, True):
            got = ofs_k(fg, ft, k, CFG, nmf_enabled=nmf)
            want = oracles.brute_ofs(
                fg.flows, ft.flows, k, CFG.bins, CFG.entropy_threshold,
                CFG.static_magnitude_threshold, CFG.pixel_norm_epsilon, nmf,
            )
            assert abs(got.score - want[0]) <= 1e-6, (trial, nmf)
            assert (got.gen_index, got.train_index) == (want[1], want[2]), (trial, nmf)
    _ok("OFS-k oracle equivalence, 200 instances, NMF on and off")


def test_nmf_behavior():
    rng = np.random.default_rng(1003)
    # pure translations at or above the magnitude floor classify as panning
    for _ in range(50):
        mag = CFG.static_magnitude_threshold + float(rng.random()) * 5.0
        theta = float(rng.random()) * 2 * np.pi
        f = np.empty((2, 6, 7))
        f[0] = mag * np.cos(theta)
        f[1] = mag * np.sin(theta)
        assert classify_flow_pair(f, CFG).kind == "panning"
    # anything below the magnitude floor classifies as static
    for _ in range(50):
        scale = float(rng.random()) * 0.3
        f = scale * rng.standard_normal((2, 5, 5))
        mean_mag = float(np.mean(np.sqrt(f[0] ** 2 + f[1] ** 2)))
        if mean_mag >= CFG.static_magnitude_threshold:
            continue
        assert classify_flow_pair(f, CFG).kind == "static"
    # filtering never increases the score (the empty-candidate 0 sentinel is
    # an audit outcome, not a window score, so it is exempt)
    rng = np.random.default_rng(1002)
    for _ in range(200):
        fg, ft, k = _random_flow_instance(rng)
        with_nmf = ofs_k(fg, ft, k, CFG, nmf_enabled=True)
        without = ofs_k(fg, ft, k, CFG, nmf_enabled=False)
        if with_nmf.gen_index != -1:
            assert with_nmf.score <= without.score + 1e-9
    _ok("NMF behavior: panning/static classification and monotone filtering")


def _motion_f1(paths, k, nmf, threshold=0.5):
    train = [load_flow_sequence(e.flow_path, e.id) for e in load_manifest(paths.train_manifest)]
    gen = [load_flow_sequence(e.flow_path, e.id) for e in load_manifest(paths.gen_manifest)]
    labels = load_labels(paths.labels)
    index = prepare_flow_index(train, CFG)
    items = []
    for seq in gen:
        _, res = ofs_batch(seq, index, k, CFG, nmf_enabled=nmf)
        items.append(ScoredItem(seq.video_id, res.score, labels[seq.video_id]))
    return f1_at(items, threshold)


def _motion_spec(seed):
    return FixtureSpec(seed=seed, n_train=60, n_generated=100, planted_pairs=20,
                       noise_sigma=0.01, frames=7, height=16, width=16)


def test_nmf_ablation_direction(tmp_path):
    margins = []
    for seed in range(5):
        paths = generate_motion_fixture(_motion_spec(seed), tmp_path / f"s{seed}")
        with_nmf = _motion_f1(paths, k=3, nmf=True)
        without = _motion_f1(paths, k=3, nmf=False)
        assert with_nmf >= without, f"seed {seed}: {with_nmf} < {without}"
        margins.append(with_nmf - without)
    assert min(margins) > 0.0, f"margins {margins}"
    _ok(f"NMF ablation direction over 5 seeds, margins {['%.3f' % m for m in margins]}")


def test_k_tradeoff_shape(tmp_path):
    for seed in range(5):
        paths = generate_motion_fixture(_motion_spec(seed), tmp_path / f"s{seed}")
        f1_k1 = _motion_f1(paths, k=1, nmf=True)
        f1_k3 = _motion_f1(paths, k=3, nmf=True)
        f1_k6 = _motion_f1(paths, k=6, nmf=True)
        assert f1_k3 >= f1_k1, f"seed {seed}: k3 {f1_k3} < k1 {f1_k1}"
        assert f1_k3 >= f1_k6, f"seed {seed}: k3 {f1_k3} < k6 {f1_k6}"
    _ok("k trade-off shape: F1(k=3) >= F1(k=1) and F1(k=6), 5 seeds")


def test_auc_oracle():
    rng = np.random.default_rng(1004)
    for _ in range(100):
        n = int(rng.integers(4, 60))
        scores = np.round(rng.random(n), 1)  # quantized to exercise midranks
        labels = (rng.random(n) < 0.5).astype(int)
        if labels.sum() == 0:
            labels[0] = 1
        if labels.sum() == n:
            labels[0] = 0
        items = [ScoredItem(f"x{i}", float(s), int(l)) for i, (s, l) in enumerate(zip(scores, labels))]
        got = auc(items)
        want = oracles.brute_auc(scores.tolist(), labels.tolist())
        assert abs(got - want) <= 1e-9
    # strictly increasing transforms leave AUC exactly unchanged
    scores = rng.random(40)
    labels = (rng.random(40) < 0.5).astype(int)
    labels[0], labels[1] = 1, 0
    base = auc([ScoredItem(f"x{i}", float(s), int(l)) for i, (s, l) in enumerate(zip(scores, labels))])
    for rep in range(20):
        a, b = float(rng.random()) + 0.1, float(rng.standard_normal())
        transformed = np.exp(a * scores + b) if rep % 2 else a * scores + b
        t = auc([ScoredItem(f"x{i}", float(s), int(l)) for i, (s, l) in enumerate(zip(transformed, labels))])
        assert t == base
    _ok("AUC oracle: 100 tie-aware sets within 1e-9, 20 transforms exact")


def test_detection_signals():
    # zero differences give exactly zero
    x = np.ones((2, 3, 2, 2), dtype=np.float32)
    traj = LatentTrajectory("z", (TrajectoryStep(0, x, x), TrajectoryStep(1, x, x)))
    series = magnitude_series(traj)
    assert all(s.m_content == 0.0 and s.m_motion == 0.0 for s in series.per_step)

    # homogeneity in the conditional-unconditional offset
    rng = np.random.default_rng(1005)
    base = rng.standard_normal((2, 4, 3, 3))
    diff = rng.standard_normal((2, 4, 3, 3))
    for alpha in (0.5, 2.0, 7.25):
        assert abs(content_magnitude(base + alpha * diff, base) - alpha * content_magnitude(base + diff, base)) <= 1e-6
        assert abs(motion_magnitude(base + alpha * diff, base) - alpha * motion_magnitude(base + diff, base)) <= 1e-6

    # 1x2x1x1 hand oracle: diffs [2, -3], transitions (-3 - 2) = -5
    cond = np.zeros((1, 2, 1, 1))
    cond[0, :, 0, 0] = [3.0, -1.0]
    uncond = np.zeros((1, 2, 1, 1))
    uncond[0, :, 0, 0] = [1.0, 2.0]
    assert content_magnitude(cond, uncond) == pytest.approx(3.0, abs=1e-12)
    assert motion_magnitude(cond, uncond) == pytest.approx(5.0, abs=1e-12)

    # 2x3x2x2 hand oracle via explicit loops
    cond = rng.integers(-4, 5, size=(2, 3, 2, 2)).astype(np.float64)
    uncond = rng.integers(-4, 5, size=(2, 3, 2, 2)).astype(np.float64)
    per_frame = []
    for f in range(3):
        total = 0.0
        for c in range(2):
            for hh in range(2):
                for ww in range(2):
                    total += (cond[c, f, hh, ww] - uncond[c, f, hh, ww]) ** 2
        per_frame.append(total**0.5)
    assert content_magnitude(cond, uncond) == pytest.approx(max(per_frame), abs=1e-6)
    per_transition = []
    for f in range(2):
        total = 0.0
        for c in range(2):
            for hh in range(2):
                for ww in range(2):
                    dc = cond[c, f + 1, hh, ww] - cond[c, f, hh, ww]
                    du = uncond[c, f + 1, hh, ww] - uncond[c, f, hh, ww]
                    total += (dc - du) ** 2
        per_transition.append(total**0.5)
    assert motion_magnitude(cond, uncond) == pytest.approx(max(per_transition), abs=1e-6)
    _ok("detection signals: zero case exact, homogeneity, hand oracles")


def test_detection_aggregation_trend(tmp_path):
    first_auc = {"content": [], "motion": []}
    all_auc = {"content": [], "motion": []}
    for seed in range(5):
        spec = FixtureSpec(seed=seed, n_train=50, n_generated=100, planted_pairs=50,
                           noise_sigma=0.0, frames=4, dim=2, height=8, width=8, steps=20)
        paths = generate_latent_fixture(spec, tmp_path / f"s{seed}")
        labels = load_labels(paths.labels)
        series = [magnitude_series(load_latent_trajectory(d)) for d in paths.trajectory_dirs]
        for strategy, sink in (("first", first_auc), ("all", all_auc)):
            signals = [aggregate(s, strategy) for s in series]
            for name, column in (("content", 0), ("motion", 1)):
                items = [
                    ScoredItem(s.trajectory_id, signals[i][column], labels[s.trajectory_id])
                    for i, s in enumerate(series)
                ]
                sink[name].append(auc(items))
    for name in ("content", "motion"):
        mean_first = float(np.mean(first_auc[name]))
        mean_all = float(np.mean(all_auc[name]))
        assert mean_all >= mean_first, f"{name}: all {mean_all} < first {mean_first}"
    _ok(
        "aggregation trend over 5 seeds: "
        f"content first {np.mean(first_auc['content']):.3f} -> all {np.mean(all_auc['content']):.3f}, "
        f"motion first {np.mean(first_auc['motion']):.3f} -> all {np.mean(all_auc['motion']):.3f}"
    )


def _f1_from_report(report_path, labels):
    report = json.loads(report_path.read_text())
    items = [
        ScoredItem(r["gen_id"], r["score"], labels[r["gen_id"]]) for r in report["records"]
    ]
    threshold = report["config"].get("gsscd_threshold", report["config"].get("ofs_threshold"))
    return f1_at(items, threshold)


def test_end_to_end_planted_recovery(tmp_path):
    runner = CliRunner()
    started = time.perf_counter()

    content_dir = tmp_path / "content"
    result = runner.invoke(cli_main, [
        "synth", "--kind", "content", "--out", str(content_dir), "--seed", "42",
        "--n-train", "150", "--n-generated", "300", "--planted", "30",
        "--noise-sigma", "0.01", "--frames", "8", "--dim", "64",
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    content_report = tmp_path / "content_report.json"
    result = runner.invoke(cli_main, [
        "audit-content", str(content_dir / "gen" / "manifest.jsonl"),
        str(content_dir / "train" / "manifest.jsonl"),
        "--gsscd-threshold", "0.4", "--out", str(content_report),
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    content_f1 = _f1_from_report(content_report, load_labels(content_dir / "labels.csv"))

    motion_dir = tmp_path / "motion"
    result = runner.invoke(cli_main, [
        "synth", "--kind", "motion", "--out", str(motion_dir), "--seed", "42",
        "--n-train", "60", "--n-generated", "100", "--planted", "20",
        "--noise-sigma", "0.01", "--frames", "7", "--height", "16", "--width", "16",
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    motion_report = tmp_path / "motion_report.json"
    result = runner.invoke(cli_main, [
        "audit-motion", str(motion_dir / "gen" / "manifest.jsonl"),
        str(motion_dir / "train" / "manifest.jsonl"),
        "--ofs-threshold", "0.5", "--k", "3", "--out", str(motion_report),
    ], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    motion_f1 = _f1_from_report(motion_report, load_labels(motion_dir / "labels.csv"))

    elapsed = time.perf_counter() - started
    assert content_f1 >= 0.95, f"content F1 {content_f1}"
    assert motion_f1 >= 0.95, f"motion F1 {motion_f1}"
    assert elapsed < 120.0, f"end-to-end took {elapsed:.1f}s"
    _ok(f"end-to-end recovery: content F1 {content_f1:.3f}, motion F1 {motion_f1:.3f}, {elapsed:.1f}s")


def test_dedup_blocked_vs_naive_and_cluster():
    rng = np.random.default_rng(1006)
    feats = rng.standard_normal((500, 32)).astype(np.float32)
    ids = [f"item_{i:03d}" for i in range(500)]
    index = make_feature_index(ids, [None] * 500, feats)
    got = topk_neighbors(index, k=10, block_rows=128, block_cols=128)
    want = oracles.brute_topk(index.features, ids, k=10)
    for row_got, row_want in zip(got.neighbors, want):
        assert [i for i, _ in row_got] == [i for i, _ in row_want]
        for (_, sg), (_, sw) in zip(row_got, row_want):
            assert abs(sg - sw) <= 1e-6

    # planted 5-duplicate cluster must own the top duplication counts
    anchor = rng.standard_normal(32).astype(np.float32)
    cluster_positions = [3, 77, 150, 340, 499]
    for pos in cluster_positions:
        feats[pos] = anchor + 0.001 * rng.standard_normal(32).astype(np.float32)
    index = make_feature_index(ids, [None] * 500, feats)
    report = duplication_counts(topk_neighbors(index, k=10), tau_dup=0.95)
    ranked = sorted(report.items, key=lambda it: -it.duplication_count)
    top_ids = {it.id for it in ranked[:5]}
    assert top_ids == {ids[p] for p in cluster_positions}
    _ok("dedup: blocked equals naive on 500 vectors; planted cluster ranks first")


def test_dedup_performance_gate():
    rng = np.random.default_rng(1007)
    feats = rng.standard_normal((10_000, 512)).astype(np.float32)
    index = make_feature_index([f"i{i:05d}" for i in range(10_000)], [None] * 10_000, feats)
    started = time.perf_counter()
    got = topk_neighbors(index, k=10, block_rows=1024, block_cols=1024, workers=4)
    elapsed = time.perf_counter() - started
    assert len(got.neighbors) == 10_000
    assert elapsed <= 60.0, f"took {elapsed:.1f}s"
    _ok(f"dedup performance gate: N=10000 D=512 k=10 in {elapsed:.1f}s on 4 workers")


def test_vmt_format_gate(tmp_path):
    rng = np.random.default_rng(1008)
    for i in range(1000):
        ndim = int(rng.integers(1, 5))
        shape = tuple(int(rng.integers(1, 5)) for _ in range(ndim))
        arr = rng.standard_normal(shape).astype(np.float32)
        path = tmp_path / "t.vmt"
        write_tensor(arr, path)
        back = read_tensor(path)
        assert back.shape == arr.shape and back.tobytes() == arr.tobytes()

    blob = b"VMT1" + struct.pack("<BBB", 1, 0, 2) + struct.pack("<2I", 2, 2) + struct.pack("<4f", 1, 2, 3, 4)
    corpus = [
        (b"XXXX" + blob[4:], BadMagicError),
        (blob[:6] + bytes([0]) + blob[7:], BadNdimError),
        (blob[:6] + bytes([7]) + blob[7:], BadNdimError),
        (blob[:20], TruncatedPayloadError),
        (blob[:15] + struct.pack("<f", float("nan")) + blob[19:], NonFiniteDataError),
    ]
    for payload, expected in corpus:
        path = tmp_path / "bad.vmt"
        path.write_bytes(payload)
        with pytest.raises(expected):
            read_tensor(path)
    _ok("VMT format: 1000 bit-exact round-trips; corrupted corpus rejected")
