"""Classification metrics and audit summary statistics.

AUC uses the midrank formulation (ties count one half), so it equals the
probability that a random positive outscores a random negative. F1 uses an
inclusive >= threshold. Audit summaries report the fraction of generations
flagged memorized plus the mean similarity over ALL records; the mean is
deliberately not restricted to flagged records, which is the only reading
consistent with observed percent/mean combinations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True)
class ScoredItem:
    id: str
    score: float
    label: int


@dataclass(frozen=True)
class AuditConfig:
    gsscd_threshold: float = 0.4
    ofs_threshold: float = 0.5
    k: int = 3
    nmf_enabled: bool = True

    def __post_init__(self) -> None:
        for name, value in (("gsscd_threshold", self.gsscd_threshold), ("ofs_threshold", self.ofs_threshold)):
            if not (-1.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [-1, 1], got {value}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class AuditRecord:
    """One generated item's best match per metric, with memorization flags."""

    gen_id: str
    content_train_id: str | None = None
    gsscd_score: float | None = None
    gsscd_gen_index: int | None = None
    gsscd_train_index: int | None = None
    content_memorized: bool | None = None
    motion_train_id: str | None = None
    ofs_score: float | None = None
    ofs_gen_index: int | None = None
    ofs_train_index: int | None = None
    motion_memorized: bool | None = None


@dataclass(frozen=True)
class MetricSummary:
    percent_memorized: float
    mean_similarity: float


@dataclass(frozen=True)
class AuditSummary:
    n: int
    content: MetricSummary | None
    motion: MetricSummary | None

    def to_json_dict(self) -> dict:
        out: dict = {"n": self.n}
        for name, side in (("content", self.content), ("motion", self.motion)):
            if side is not None:
                out[name] = {
                    "percent_memorized": side.percent_memorized,
                    "mean_similarity": side.mean_similarity,
                }
        return out


def _ranks_with_ties(values: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values receiving the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc(items: list[ScoredItem]) -> float:
    """Probability a random positive outscores a random negative, ties half."""
    labels = np.array([it.label for it in items])
    scores = np.array([it.score for it in items], dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    ranks = _ranks_with_ties(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def f1_at(items: list[ScoredItem], threshold: float) -> float:
    """F1 of the rule "memorized iff score >= threshold"; 0 when degenerate."""
    if not items:
        raise ValueError("empty scored set")
    tp = sum(1 for it in items if it.score >= threshold and it.label == 1)
    fp = sum(1 for it in items if it.score >= threshold and it.label == 0)
    fn = sum(1 for it in items if it.score < threshold and it.label == 1)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def best_f1(items: list[ScoredItem]) -> tuple[float, float]:
    """(threshold, f1) maximizing f1_at over observed scores plus +inf.

    Ties resolve to the lowest threshold. The +inf candidate covers the
    predict-nothing rule, so the result is never worse than F1 = 0.
    """
    if not items:
        raise ValueError("empty scored set")
    candidates = sorted({it.score for it in items})
    candidates.append(float("inf"))
    best_thr, best_score = None, -1.0
    for thr in candidates:
        score = f1_at(items, thr)
        if score > best_score:
            best_thr, best_score = thr, score
    return float(best_thr), float(best_score)


def load_scored_csv(path: str | Path) -> list[ScoredItem]:
    """Read an id,score,label CSV; malformed rows are reported by line number."""
    path = Path(path)
    items: list[ScoredItem] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "score", "label"]:
            raise DataError(f"{path}: expected header 'id,score,label', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            item_id = row[0]
            if item_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {item_id!r}")
            seen.add(item_id)
            try:
                score = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score {row[1]!r}") from None
            if row[2].strip() not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {row[2]!r}")
            items.append(ScoredItem(item_id, score, int(row[2])))
    return items


def summarize(records: list[AuditRecord], cfg: AuditConfig | None = None) -> AuditSummary:
    """Percent memorized at the configured thresholds plus all-records mean similarity."""
    cfg = cfg or AuditConfig()
    if not records:
        raise ValueError("empty record list")

    def side(scores: list[float], threshold: float) -> MetricSummary | None:
        if not scores:
            return None
        flagged = sum(1 for s in scores if s >= threshold)
        return MetricSummary(
            percent_memorized=100.0 * flagged / len(scores),
            mean_similarity=float(np.mean(scores)),
        )

    content_scores = [r.gsscd_score for r in records if r.gsscd_score is not None]
    motion_scores = [r.ofs_score for r in records if r.ofs_score is not None]
    return AuditSummary(
        n=len(records),
        content=side(content_scores, cfg.gsscd_threshold),
        motion=side(motion_scores, cfg.ofs_threshold),
    )
