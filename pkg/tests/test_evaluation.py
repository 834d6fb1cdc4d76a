from __future__ import annotations

import numpy as np
import pytest

import oracles
from vidmem.evaluation import (
    AuditConfig,
    AuditRecord,
    ScoredItem,
    auc,
    best_f1,
    f1_at,
    load_scored_csv,
    summarize,
)
from vidmem.exceptions import DataError


def _set(scores, labels):
    return [ScoredItem(f"x{i}", s, l) for i, (s, l) in enumerate(zip(scores, labels))]


def test_auc_perfect_separation():
    assert auc(_set([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])) == 1.0


def test_auc_derived_counting():
    assert auc(_set([0.9, 0.6, 0.4, 0.2], [1, 0, 1, 0])) == pytest.approx(0.75)


def test_auc_label_flip_complement():
    rng = np.random.default_rng(0)
    scores = np.round(rng.random(40), 1)  # quantized to force ties
    labels = (rng.random(40) < 0.5).astype(int)
    if labels.sum() in (0, 40):
        labels[0] = 1 - labels[0]
    a = auc(_set(scores, labels))
    flipped = auc(_set(scores, 1 - labels))
    assert a + flipped == pytest.approx(1.0, abs=1e-12)


def test_auc_matches_pair_counting_with_ties():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(4, 40))
        scores = np.round(rng.random(n), 1)
        labels = (rng.random(n) < 0.4).astype(int)
        if labels.sum() == 0:
            labels[0] = 1
        if labels.sum() == n:
            labels[0] = 0
        got = auc(_set(scores, labels))
        want = oracles.brute_auc(scores.tolist(), labels.tolist())
        assert got == pytest.approx(want, abs=1e-12)


def test_auc_single_class_rejected():
    with pytest.raises(ValueError, match="positive"):
        auc(_set([0.1, 0.2], [1, 1]))


def test_auc_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    scores = rng.random(30)
    labels = (rng.random(30) < 0.5).astype(int)
    labels[0], labels[1] = 1, 0
    base = auc(_set(scores, labels))
    assert auc(_set(2.0 * scores + 1.0, labels)) == base
    assert auc(_set(np.exp(scores), labels)) == base


def test_f1_perfect():
    assert f1_at(_set([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]), 0.5) == 1.0


def test_f1_all_predicted_negative():
    assert f1_at(_set([0.1, 0.2], [1, 1]), 0.9) == 0.0


def test_f1_derived_confusion_matrix():
    assert f1_at(_set([0.9, 0.6, 0.4], [1, 0, 1]), 0.5) == pytest.approx(0.5)


def test_f1_threshold_is_inclusive():
    assert f1_at(_set([0.5], [1]), 0.5) == 1.0


def test_f1_and_best_f1_reject_empty_sets():
    with pytest.raises(ValueError, match="empty"):
        f1_at([], 0.5)
    with pytest.raises(ValueError, match="empty"):
        best_f1([])


def test_f1_extreme_thresholds():
    items = _set([0.9, 0.6, 0.1], [1, 0, 1])
    # minus infinity: everything predicted positive, recall 1
    assert f1_at(items, float("-inf")) == pytest.approx(2 * 2 / (2 * 2 + 1))
    # plus infinity: nothing predicted positive
    assert f1_at(items, float("inf")) == 0.0


def test_best_f1_perfect_at_smallest_positive():
    thr, score = best_f1(_set([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]))
    assert score == 1.0
    assert thr == pytest.approx(0.8)


def test_best_f1_is_maximal():
    rng = np.random.default_rng(3)
    items = _set(np.round(rng.random(50), 2), (rng.random(50) < 0.5).astype(int))
    thr, score = best_f1(items)
    for tau in np.linspace(-0.5, 1.5, 101):
        assert score >= f1_at(items, float(tau)) - 1e-12


def test_best_f1_matches_sweep_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        items = _set(np.round(rng.random(50), 2), (rng.random(50) < 0.4).astype(int))
        got_thr, got_f1 = best_f1(items)
        candidates = sorted({it.score for it in items}) + [float("inf")]
        want = max(
            ((f1_at(items, t), -t) for t in candidates),
        )
        assert got_f1 == pytest.approx(want[0], abs=1e-12)
        assert got_thr == pytest.approx(-want[1])


def test_best_f1_ties_take_lowest_threshold():
    # thresholds 0.3 and 0.9 both give F1 = 2/3; the lower one wins
    items = _set([0.9, 0.5, 0.4, 0.3], [1, 0, 0, 1])
    assert f1_at(items, 0.3) == pytest.approx(f1_at(items, 0.9))
    thr, score = best_f1(items)
    assert score == pytest.approx(2.0 / 3.0)
    assert thr == pytest.approx(0.3)


def _records(scores, key="gsscd_score"):
    out = []
    for i, s in enumerate(scores):
        kwargs = {key: s}
        out.append(AuditRecord(gen_id=f"g{i}", **kwargs))
    return out


def test_summarize_counting():
    scores = [0.5, 0.45, 0.41, 0.1, 0.2, 0.3, 0.35, 0.39, 0.05, 0.0]
    summary = summarize(_records(scores), AuditConfig())
    assert summary.content.percent_memorized == pytest.approx(30.0)
    assert summary.n == 10


def test_summarize_mean_over_all_records():
    summary = summarize(_records([0.33] * 8), AuditConfig())
    assert summary.content.percent_memorized == 0.0
    assert summary.content.mean_similarity == pytest.approx(0.33, abs=1e-7)


def test_summarize_degenerate_threshold():
    summary = summarize(
        _records([0.1, -0.5, 0.0]), AuditConfig(gsscd_threshold=-1.0)
    )
    assert summary.content.percent_memorized == 100.0


def test_summarize_threshold_monotonicity():
    rng = np.random.default_rng(5)
    scores = rng.random(50).tolist()
    prev = 101.0
    for thr in np.linspace(-1, 1, 21):
        pct = summarize(_records(scores), AuditConfig(gsscd_threshold=float(thr))).content.percent_memorized
        assert pct <= prev + 1e-12
        prev = pct


def test_summarize_motion_side():
    summary = summarize(_records([0.6, 0.2], key="ofs_score"), AuditConfig())
    assert summary.content is None
    assert summary.motion.percent_memorized == pytest.approx(50.0)


def test_summarize_combined_audit_reports_both_sides():
    records = [
        AuditRecord(gen_id="g0", gsscd_score=0.9, ofs_score=0.1),
        AuditRecord(gen_id="g1", gsscd_score=0.1, ofs_score=0.7),
    ]
    summary = summarize(records, AuditConfig())
    assert summary.n == 2
    assert summary.content.percent_memorized == pytest.approx(50.0)
    assert summary.motion.percent_memorized == pytest.approx(50.0)
    assert summary.content.mean_similarity == pytest.approx(0.5)
    assert summary.motion.mean_similarity == pytest.approx(0.4)
    payload = summary.to_json_dict()
    assert set(payload) == {"n", "content", "motion"}


def test_summarize_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        summarize([], AuditConfig())


def test_audit_config_validation():
    with pytest.raises(ValueError, match="gsscd"):
        AuditConfig(gsscd_threshold=1.5)


def test_load_scored_csv(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("id,score,label\na,0.9,1\nb,0.2,0\n", encoding="utf-8")
    items = load_scored_csv(path)
    assert [it.id for it in items] == ["a", "b"]
    assert items[0].score == pytest.approx(0.9)


@pytest.mark.parametrize(
    "content, match",
    [
        ("id,score\na,0.9\n", "header"),
        ("id,score,label\na,x,1\n", ":2:"),
        ("id,score,label\na,0.9,1\na,0.8,0\n", ":3:"),
        ("id,score,label\na,0.9,2\n", "label"),
    ],
)
def test_load_scored_csv_errors(tmp_path, content, match):
    path = tmp_path / "s.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DataError, match=match):
        load_scored_csv(path)
