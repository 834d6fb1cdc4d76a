"""Motion-memorization similarity over optical-flow fields.

The unit of comparison is one flow field (the displacement between two
consecutive frames). Two fields are compared by the cosine of their flow
vectors at corresponding pixels, averaged over the frame; a video pair is
scored by the best k-long run of aligned field similarities. Natural Motion
Filtering drops camera panning (low direction entropy) and static fields
(low mean magnitude) before scoring, since such motion carries no privacy
risk even when it matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .content import METRIC_OFS, SimilarityResult, _rowmajor_argmax
from .data import FlowSequence

KIND_INFORMATIVE = "informative"
KIND_PANNING = "panning"
KIND_STATIC = "static"

DEFAULT_K = 3


@dataclass(frozen=True)
class NMFConfig:
    """Thresholds for Natural Motion Filtering.

    The defaults (36 bins of 10 degrees, 1.0 nat entropy floor, 0.5 px static
    floor) are this implementation's documented choices; they are tunable
    everywhere they are consumed.
    """

    bins: int = 36
    entropy_threshold: float = 1.0
    static_magnitude_threshold: float = 0.5
    pixel_norm_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if not np.isfinite(self.entropy_threshold) or self.entropy_threshold < 0:
            raise ValueError("entropy_threshold must be finite and >= 0")
        if not np.isfinite(self.static_magnitude_threshold) or self.static_magnitude_threshold < 0:
            raise ValueError("static_magnitude_threshold must be finite and >= 0")
        if self.pixel_norm_epsilon <= 0:
            raise ValueError("pixel_norm_epsilon must be > 0")


@dataclass(frozen=True)
class FlowPairClassification:
    flow_index: int
    kind: str  # one of KIND_*
    entropy: float  # nats
    mean_magnitude: float  # pixels


@dataclass(frozen=True)
class FlowSimilarityMatrix:
    values: np.ndarray  # [M1, M2] mean per-pixel cosine
    valid_mask: np.ndarray  # [M1, M2] bool; False iff either flow is natural motion


def _check_flow_field(f: np.ndarray) -> np.ndarray:
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ValueError(f"flow field must be [2, H, W], got shape {arr.shape}")
    return arr


def _unit_field(f: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-pixel unit vectors; pixels with norm below epsilon become (0, 0)."""
    norms = np.sqrt(f[0] ** 2 + f[1] ** 2)
    safe = np.where(norms >= epsilon, norms, 1.0)
    unit = f / safe
    unit[:, norms < epsilon] = 0.0
    return unit


def pixel_flow_cosine(
    fg: np.ndarray, ft: np.ndarray, epsilon: float = 1e-8
) -> np.ndarray:
    """Cosine of flow vectors at corresponding pixels, as an [H, W] map.

    Pixels where either vector's norm is below ``epsilon`` yield 0: motion
    without direction is no evidence either way.
    """
    fg = _check_flow_field(fg)
    ft = _check_flow_field(ft)
    if fg.shape != ft.shape:
        raise ValueError(f"spatial mismatch: {fg.shape} vs {ft.shape}")
    ug = _unit_field(fg, epsilon)
    ut = _unit_field(ft, epsilon)
    return ug[0] * ut[0] + ug[1] * ut[1]


def mean_flow_similarity(fg: np.ndarray, ft: np.ndarray, epsilon: float = 1e-8) -> float:
    """Pixel-averaged flow cosine; zero-contribution pixels stay in the denominator."""
    return float(np.mean(pixel_flow_cosine(fg, ft, epsilon)))


def direction_entropy(f: np.ndarray, cfg: NMFConfig) -> float:
    """Entropy (nats) of the flow-direction histogram over ``cfg.bins`` uniform bins.

    Only pixels with norm >= cfg.pixel_norm_epsilon contribute an angle; a
    field with no such pixel has entropy 0 by convention.
    """
    f = _check_flow_field(f)
    norms = np.sqrt(f[0] ** 2 + f[1] ** 2)
    moving = norms >= cfg.pixel_norm_epsilon
    if not moving.any():
        return 0.0
    theta = np.arctan2(f[1][moving], f[0][moving])
    theta = np.where(theta >= np.pi, theta - 2.0 * np.pi, theta)  # fold +pi onto -pi
    idx = np.floor((theta + np.pi) * (cfg.bins / (2.0 * np.pi))).astype(np.int64)
    idx = np.clip(idx, 0, cfg.bins - 1)
    counts = np.bincount(idx, minlength=cfg.bins)
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def classify_flow_pair(
    f: np.ndarray, cfg: NMFConfig | None = None, flow_index: int = 0
) -> FlowPairClassification:
    """Label one flow field as informative, panning, or static.

    Static (mean magnitude below threshold) takes precedence over panning:
    near-zero flow has unreliable angle statistics.
    """
    cfg = cfg or NMFConfig()
    f = _check_flow_field(f)
    mean_magnitude = float(np.mean(np.sqrt(f[0] ** 2 + f[1] ** 2)))
    entropy = direction_entropy(f, cfg)
    if mean_magnitude < cfg.static_magnitude_threshold:
        kind = KIND_STATIC
    elif entropy < cfg.entropy_threshold:
        kind = KIND_PANNING
    else:
        kind = KIND_INFORMATIVE
    return FlowPairClassification(flow_index, kind, entropy, mean_magnitude)


def classify_sequence(seq: FlowSequence, cfg: NMFConfig | None = None) -> list[FlowPairClassification]:
    cfg = cfg or NMFConfig()
    return [classify_flow_pair(seq.flows[m], cfg, flow_index=m) for m in range(seq.n_flows)]


def _unit_flat(seq: FlowSequence, epsilon: float) -> np.ndarray:
    """[M, 2*H*W] matrix of per-pixel unit vectors, float64."""
    flows = seq.flows.astype(np.float64)
    norms = np.sqrt(flows[:, 0] ** 2 + flows[:, 1] ** 2)  # [M, H, W]
    safe = np.where(norms >= epsilon, norms, 1.0)
    unit = flows / safe[:, None, :, :]
    mask = norms < epsilon
    unit[:, 0][mask] = 0.0
    unit[:, 1][mask] = 0.0
    return unit.reshape(seq.n_flows, -1)


def flow_similarity_matrix(
    gen: FlowSequence,
    train: FlowSequence,
    cfg: NMFConfig | None = None,
) -> FlowSimilarityMatrix:
    """All-pairs mean flow similarity with the natural-motion validity mask."""
    cfg = cfg or NMFConfig()
    if gen.spatial_shape != train.spatial_shape:
        raise ValueError(
            f"spatial mismatch: {gen.video_id} is {gen.spatial_shape},"
            f" {train.video_id} is {train.spatial_shape}"
        )
    h, w = gen.spatial_shape
    values = _unit_flat(gen, cfg.pixel_norm_epsilon) @ _unit_flat(train, cfg.pixel_norm_epsilon).T
    values /= float(h * w)
    inf_g = np.array([c.kind == KIND_INFORMATIVE for c in classify_sequence(gen, cfg)])
    inf_t = np.array([c.kind == KIND_INFORMATIVE for c in classify_sequence(train, cfg)])
    return FlowSimilarityMatrix(values, np.outer(inf_g, inf_t))


def _window_scores(S: np.ndarray, k: int) -> np.ndarray:
    """Mean of S along length-k diagonals: [M1-k+1, M2-k+1]."""
    a = S.shape[0] - k + 1
    b = S.shape[1] - k + 1
    acc = np.zeros((a, b), dtype=S.dtype)
    for n in range(k):
        acc += S[n : n + a, n : n + b]
    return acc / k


def _run_all(flags: np.ndarray, k: int) -> np.ndarray:
    """run[i] = all(flags[i:i+k]) for each window start."""
    a = flags.shape[0] - k + 1
    run = np.ones(a, dtype=bool)
    for n in range(k):
        run &= flags[n : n + a]
    return run


def _best_window(
    S: np.ndarray,
    k: int,
    inf_g: np.ndarray | None,
    inf_t: np.ndarray | None,
) -> tuple[float, int, int] | None:
    """Best k-window of S, or None when filtering leaves no candidate."""
    W = _window_scores(S, k)
    if inf_g is not None:
        valid = np.outer(_run_all(inf_g, k), _run_all(inf_t, k))
        if not valid.any():
            return None
        W = np.where(valid, W, -np.inf)
    return _rowmajor_argmax(W)


def ofs_k(
    gen: FlowSequence,
    train: FlowSequence,
    k: int = DEFAULT_K,
    cfg: NMFConfig | None = None,
    nmf_enabled: bool = True,
) -> SimilarityResult:
    """Maximum mean similarity over aligned k-long flow windows.

    With filtering enabled a window is a candidate only when all k generated
    AND all k training flows in it are informative; if nothing qualifies the
    result is the 0 sentinel with indices (-1, -1) rather than an error,
    since "no memorization evidence" is a legitimate audit outcome.
    """
    cfg = cfg or NMFConfig()
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > gen.n_flows or k > train.n_flows:
        raise ValueError(
            f"k = {k} exceeds flow count ({gen.video_id}: {gen.n_flows},"
            f" {train.video_id}: {train.n_flows})"
        )
    if gen.spatial_shape != train.spatial_shape:
        raise ValueError(
            f"spatial mismatch: {gen.video_id} is {gen.spatial_shape},"
            f" {train.video_id} is {train.spatial_shape}"
        )
    h, w = gen.spatial_shape
    S = _unit_flat(gen, cfg.pixel_norm_epsilon) @ _unit_flat(train, cfg.pixel_norm_epsilon).T
    S /= float(h * w)
    if nmf_enabled:
        inf_g = np.array([c.kind == KIND_INFORMATIVE for c in classify_sequence(gen, cfg)])
        inf_t = np.array([c.kind == KIND_INFORMATIVE for c in classify_sequence(train, cfg)])
        found = _best_window(S, k, inf_g, inf_t)
    else:
        found = _best_window(S, k, None, None)
    if found is None:
        return SimilarityResult(0.0, -1, -1, METRIC_OFS)
    score, i, j = found
    return SimilarityResult(score, i, j, METRIC_OFS)


class FlowIndex:
    """Training flow sequences with unit vectors and classifications precomputed."""

    def __init__(self, sequences: Iterable[FlowSequence], cfg: NMFConfig | None = None):
        sequences = list(sequences)
        if not sequences:
            raise ValueError("empty index")
        self.cfg = cfg or NMFConfig()
        self.spatial = sequences[0].spatial_shape
        for seq in sequences:
            if seq.spatial_shape != self.spatial:
                raise ValueError(
                    f"spatial mismatch: {seq.video_id} is {seq.spatial_shape},"
                    f" expected {self.spatial}"
                )
        self.ids = tuple(seq.video_id for seq in sequences)
        self.n_flows = tuple(seq.n_flows for seq in sequences)
        self.flat = np.concatenate(
            [_unit_flat(seq, self.cfg.pixel_norm_epsilon) for seq in sequences], axis=0
        )
        self.offsets = np.concatenate([[0], np.cumsum(self.n_flows)]).astype(np.int64)
        self.informative = np.concatenate(
            [
                [c.kind == KIND_INFORMATIVE for c in classify_sequence(seq, self.cfg)]
                for seq in sequences
            ]
        ).astype(bool)

    def __len__(self) -> int:
        return len(self.ids)


def prepare_flow_index(
    index: Sequence[FlowSequence] | FlowIndex, cfg: NMFConfig | None = None
) -> FlowIndex:
    if isinstance(index, FlowIndex):
        if cfg is not None and index.cfg != cfg:
            raise ValueError("FlowIndex was prepared with a different NMFConfig")
        return index
    return FlowIndex(index, cfg)


def ofs_batch(
    gen: FlowSequence,
    index: Sequence[FlowSequence] | FlowIndex,
    k: int = DEFAULT_K,
    cfg: NMFConfig | None = None,
    nmf_enabled: bool = True,
) -> tuple[str, SimilarityResult]:
    """Training item maximizing OFS-k against ``gen``; ties break to the lowest position."""
    cfg = cfg or NMFConfig()
    prepared = prepare_flow_index(index, cfg)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    offenders = [vid for vid, m in zip(prepared.ids, prepared.n_flows) if m < k]
    if k > gen.n_flows:
        offenders.insert(0, gen.video_id)
    if offenders:
        raise ValueError(f"k = {k} exceeds flow count of: {', '.join(offenders)}")
    if gen.spatial_shape != prepared.spatial:
        raise ValueError(
            f"spatial mismatch: {gen.video_id} is {gen.spatial_shape},"
            f" index is {prepared.spatial}"
        )

    h, w = gen.spatial_shape
    S_all = _unit_flat(gen, cfg.pixel_norm_epsilon) @ prepared.flat.T
    S_all /= float(h * w)
    inf_g = None
    if nmf_enabled:
        inf_g = np.array([c.kind == KIND_INFORMATIVE for c in classify_sequence(gen, cfg)])

    best_pos = -1
    best: tuple[float, int, int] = (-np.inf, -1, -1)
    for pos in range(len(prepared)):
        a, b = int(prepared.offsets[pos]), int(prepared.offsets[pos + 1])
        S = S_all[:, a:b]
        inf_t = prepared.informative[a:b] if nmf_enabled else None
        found = _best_window(S, k, inf_g, inf_t)
        cand = found if found is not None else (0.0, -1, -1)
        if cand[0] > best[0]:
            best, best_pos = cand, pos
    score, i, j = best
    return prepared.ids[best_pos], SimilarityResult(score, i, j, METRIC_OFS)
