"""Scikit-learn style estimators wrapping the audit primitives.

fit() indexes the training side (the expensive, reusable part); predict()
flags generated items as memorized at the configured threshold, and
score_samples() / match() expose the underlying similarities. Parameters
follow sklearn conventions (constructor stores them verbatim, get_params /
set_params / clone work), so the auditors compose with the wider ecosystem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator

from . import content as _content
from . import dedup as _dedup
from . import detection as _detection
from . import motion as _motion
from .content import SimilarityResult
from .dedup import DuplicationReport, FeatureIndex, PromptDataset
from .evaluation import AuditRecord
from .motion import NMFConfig
from .validation import check_embedding_sequences, check_flow_sequences, check_trajectories


def _run_parallel(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


class ContentMemorizationAuditor(BaseEstimator):
    """Flags generated videos whose best frame-pair similarity crosses a threshold."""

    def __init__(self, threshold: float = 0.4, block_size: int = _content.DEFAULT_BLOCK_SIZE,
                 workers: int | None = None):
        self.threshold = threshold
        self.block_size = block_size
        self.workers = workers

    def fit(self, X, y=None):
        sequences = check_embedding_sequences(X)
        self.index_ = _content.prepare_embedding_index(sequences)
        self.n_features_in_ = self.index_.width
        return self

    def _check_fitted(self):
        if not hasattr(self, "index_"):
            raise RuntimeError("auditor is not fitted; call fit(train_sequences) first")

    def match(self, X) -> list[tuple[str, SimilarityResult]]:
        """Best training match per generated sequence."""
        self._check_fitted()
        sequences = check_embedding_sequences(X)
        return _run_parallel(
            lambda seq: _content.best_match(seq, self.index_, self.block_size),
            sequences,
            self.workers,
        )

    def score_samples(self, X) -> np.ndarray:
        return np.array([result.score for _, result in self.match(X)])

    def predict(self, X) -> np.ndarray:
        return (self.score_samples(X) >= self.threshold).astype(int)

    def audit(self, X) -> list[AuditRecord]:
        sequences = check_embedding_sequences(X)
        records = []
        for seq, (train_id, result) in zip(sequences, self.match(sequences)):
            records.append(
                AuditRecord(
                    gen_id=seq.video_id,
                    content_train_id=train_id,
                    gsscd_score=result.score,
                    gsscd_gen_index=result.gen_index,
                    gsscd_train_index=result.train_index,
                    content_memorized=result.score >= self.threshold,
                )
            )
        return records


class MotionMemorizationAuditor(BaseEstimator):
    """Flags generated videos whose best aligned flow-window similarity crosses a threshold."""

    def __init__(self, threshold: float = 0.5, k: int = _motion.DEFAULT_K,
                 nmf_enabled: bool = True, bins: int = 36, entropy_threshold: float = 1.0,
                 static_magnitude_threshold: float = 0.5, pixel_norm_epsilon: float = 1e-8,
                 workers: int | None = None):
        self.threshold = threshold
        self.k = k
        self.nmf_enabled = nmf_enabled
        self.bins = bins
        self.entropy_threshold = entropy_threshold
        self.static_magnitude_threshold = static_magnitude_threshold
        self.pixel_norm_epsilon = pixel_norm_epsilon
        self.workers = workers

    def _nmf_config(self) -> NMFConfig:
        return NMFConfig(
            bins=self.bins,
            entropy_threshold=self.entropy_threshold,
            static_magnitude_threshold=self.static_magnitude_threshold,
            pixel_norm_epsilon=self.pixel_norm_epsilon,
        )

    def fit(self, X, y=None):
        sequences = check_flow_sequences(X)
        self.index_ = _motion.prepare_flow_index(sequences, self._nmf_config())
        return self

    def _check_fitted(self):
        if not hasattr(self, "index_"):
            raise RuntimeError("auditor is not fitted; call fit(train_sequences) first")

    def match(self, X) -> list[tuple[str, SimilarityResult]]:
        self._check_fitted()
        sequences = check_flow_sequences(X)
        cfg = self.index_.cfg
        return _run_parallel(
            lambda seq: _motion.ofs_batch(seq, self.index_, self.k, cfg, self.nmf_enabled),
            sequences,
            self.workers,
        )

    def score_samples(self, X) -> np.ndarray:
        return np.array([result.score for _, result in self.match(X)])

    def predict(self, X) -> np.ndarray:
        return (self.score_samples(X) >= self.threshold).astype(int)

    def audit(self, X) -> list[AuditRecord]:
        sequences = check_flow_sequences(X)
        records = []
        for seq, (train_id, result) in zip(sequences, self.match(sequences)):
            records.append(
                AuditRecord(
                    gen_id=seq.video_id,
                    motion_train_id=train_id,
                    ofs_score=result.score,
                    ofs_gen_index=result.gen_index,
                    ofs_train_index=result.train_index,
                    motion_memorized=result.score >= self.threshold,
                )
            )
        return records


class MemorizationDetector(BaseEstimator):
    """Stateless transformer from latent trajectories to detection signals."""

    def __init__(self, strategy: str = _detection.STRATEGY_ALL, n: int = 10,
                 content_threshold: float | None = None, motion_threshold: float | None = None):
        self.strategy = strategy
        self.n = n
        self.content_threshold = content_threshold
        self.motion_threshold = motion_threshold

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        """[n_samples, 2] array of (content_signal, motion_signal)."""
        trajectories = check_trajectories(X)
        out = np.empty((len(trajectories), 2), dtype=np.float64)
        for row, traj in enumerate(trajectories):
            series = _detection.magnitude_series(traj)
            out[row] = _detection.aggregate(series, self.strategy, self.n)
        return out

    def predict(self, X) -> np.ndarray:
        """[n_samples, 2] int flags; requires both thresholds."""
        if self.content_threshold is None or self.motion_threshold is None:
            raise RuntimeError("predict requires content_threshold and motion_threshold")
        signals = self.transform(X)
        thresholds = np.array([self.content_threshold, self.motion_threshold])
        return (signals >= thresholds).astype(int)


class DuplicationAnalyzer(BaseEstimator):
    """Exact top-k neighbor graph over dataset features, with prompt curation."""

    def __init__(self, n_neighbors: int = _dedup.DEFAULT_K, tau: float = _dedup.DEFAULT_TAU,
                 block_rows: int = _dedup.DEFAULT_BLOCK, block_cols: int = _dedup.DEFAULT_BLOCK,
                 workers: int = 1):
        self.n_neighbors = n_neighbors
        self.tau = tau
        self.block_rows = block_rows
        self.block_cols = block_cols
        self.workers = workers

    def fit(self, X, y=None):
        """X: a FeatureIndex, or a raw [N, D] array (ids synthesized)."""
        if isinstance(X, FeatureIndex):
            index = X
        else:
            arr = np.asarray(X, dtype=np.float32)
            if arr.ndim != 2:
                raise ValueError(f"expected [N, D] features, got shape {arr.shape}")
            index = _dedup.make_feature_index(
                [f"item_{i:06d}" for i in range(arr.shape[0])],
                [None] * arr.shape[0],
                arr,
            )
        self.index_ = index
        self.neighbors_ = _dedup.topk_neighbors(
            index, self.n_neighbors, self.block_rows, self.block_cols, self.workers or 1
        )
        self.report_ = _dedup.duplication_counts(self.neighbors_, self.tau)
        self.n_features_in_ = index.features.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "report_"):
            raise RuntimeError("analyzer is not fitted; call fit(features) first")

    def duplication_report(self) -> DuplicationReport:
        self._check_fitted()
        return self.report_

    def curate_prompts(self, limit: int) -> PromptDataset:
        self._check_fitted()
        return _dedup.curate_prompts(self.index_, self.report_, limit)
