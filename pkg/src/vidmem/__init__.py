"""Memorization audit engine for video diffusion models.

Library layers:

- :mod:`vidmem.vmt` / :mod:`vidmem.data` -- bit-exact tensor interchange,
  manifests, labels, and the embedding/flow/latent containers.
- :mod:`vidmem.content` / :mod:`vidmem.motion` -- similarity metrics with
  argmax locations and natural-motion filtering.
- :mod:`vidmem.detection` -- inference-time magnitude signals.
- :mod:`vidmem.dedup` -- blocked exact top-k duplication analysis and
  prompt curation.
- :mod:`vidmem.evaluation` -- AUC/F1 and audit summaries.
- :mod:`vidmem.estimators` -- sklearn-style fit/predict wrappers.
- :mod:`vidmem.synth` -- deterministic fixtures with planted memorization.
"""

from .content import (
    SimilarityResult,
    best_match,
    cosine,
    frame_similarity_matrix,
    gsscd,
    vsscd,
)
from .data import (
    DatasetManifest,
    EmbeddingSequence,
    FlowSequence,
    LatentTrajectory,
    load_embedding_sequence,
    load_flow_sequence,
    load_labels,
    load_latent_trajectory,
    load_manifest,
    make_embedding_sequence,
    make_flow_sequence,
)
from .detection import (
    MagnitudeSeries,
    aggregate,
    content_magnitude,
    magnitude_series,
    motion_magnitude,
    step_magnitude_image,
)
from .dedup import (
    DuplicationReport,
    FeatureIndex,
    PromptDataset,
    curate_prompts,
    duplication_counts,
    topk_neighbors,
)
from .estimators import (
    ContentMemorizationAuditor,
    DuplicationAnalyzer,
    MemorizationDetector,
    MotionMemorizationAuditor,
)
from .evaluation import AuditConfig, AuditRecord, AuditSummary, auc, best_f1, f1_at, summarize
from .motion import (
    NMFConfig,
    classify_flow_pair,
    mean_flow_similarity,
    ofs_batch,
    ofs_k,
    pixel_flow_cosine,
)
from .synth import (
    FixtureSpec,
    generate_content_fixture,
    generate_latent_fixture,
    generate_motion_fixture,
)
from .vmt import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AuditConfig",
    "AuditRecord",
    "AuditSummary",
    "ContentMemorizationAuditor",
    "DatasetManifest",
    "DuplicationAnalyzer",
    "DuplicationReport",
    "EmbeddingSequence",
    "FeatureIndex",
    "FixtureSpec",
    "FlowSequence",
    "LatentTrajectory",
    "MagnitudeSeries",
    "MemorizationDetector",
    "MotionMemorizationAuditor",
    "NMFConfig",
    "PromptDataset",
    "SimilarityResult",
    "aggregate",
    "auc",
    "best_f1",
    "best_match",
    "classify_flow_pair",
    "content_magnitude",
    "cosine",
    "curate_prompts",
    "duplication_counts",
    "f1_at",
    "frame_similarity_matrix",
    "generate_content_fixture",
    "generate_latent_fixture",
    "generate_motion_fixture",
    "gsscd",
    "load_embedding_sequence",
    "load_flow_sequence",
    "load_labels",
    "load_latent_trajectory",
    "load_manifest",
    "magnitude_series",
    "make_embedding_sequence",
    "make_flow_sequence",
    "mean_flow_similarity",
    "motion_magnitude",
    "ofs_batch",
    "ofs_k",
    "pixel_flow_cosine",
    "read_tensor",
    "step_magnitude_image",
    "summarize",
    "topk_neighbors",
    "vsscd",
    "write_tensor",
]
