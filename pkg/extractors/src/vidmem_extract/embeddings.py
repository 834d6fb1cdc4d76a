"""Per-frame copy-detection embedding extraction.

The model is any TorchScript module mapping a [N, 3, S, S] image batch to
[N, D] descriptors; published copy-detection checkpoints ship in exactly
this form. Rows are unit-normalized on the way out, matching what the
audit engine expects at load.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .jobs import ExtractorJob, ModelUnavailableError, media_items, prepare_out_dir
from .media import load_frames
from .vmtio import write_manifest, write_vmt

DEFAULT_SIZE = 224
_NORM_MEAN = (0.485, 0.456, 0.406)
_NORM_STD = (0.229, 0.224, 0.225)


def _torch():
    try:
        import torch
    except ImportError as exc:
        raise ModelUnavailableError("torch is required for embedding extraction") from exc
    return torch


def _load_scripted(weights: Path | None, what: str):
    torch = _torch()
    if weights is None:
        raise ModelUnavailableError(f"{what} needs --weights pointing at a TorchScript file")
    try:
        model = torch.jit.load(str(weights), map_location="cpu")
    except Exception as exc:
        raise ModelUnavailableError(f"cannot load {weights}: {exc}") from exc
    model.eval()
    return model


def preprocess_frames(frames: np.ndarray, size: int = DEFAULT_SIZE):
    """[N, H, W, 3] floats in [0, 1] -> normalized [N, 3, size, size] tensor."""
    torch = _torch()
    x = torch.from_numpy(np.ascontiguousarray(frames)).permute(0, 3, 1, 2)
    x = torch.nn.functional.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)
    mean = torch.tensor(_NORM_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(_NORM_STD).view(1, 3, 1, 1)
    return (x - mean) / std


def extract_embeddings(job: ExtractorJob) -> Path:
    torch = _torch()
    model = _load_scripted(job.weights, "embedding extraction")
    size = int(job.extra.get("size", DEFAULT_SIZE))
    out = prepare_out_dir(job)
    entries = []
    for item_id, path in media_items(job.inputs):
        frames = load_frames(path, job.frame_cap)
        with torch.no_grad():
            emb = model(preprocess_frames(frames, size).to(job.device)).cpu().numpy()
        if emb.ndim != 2 or emb.shape[0] != frames.shape[0]:
            raise ModelUnavailableError(
                f"model returned shape {emb.shape}, expected [{frames.shape[0]}, D]"
            )
        emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)
        name = f"{item_id}.vmt"
        write_vmt(emb.astype(np.float32), out / name)
        entries.append(
            {
                "id": item_id,
                "embedding_path": name,
                "frames": int(emb.shape[0]),
                "model": str(job.weights),
                "preprocessing": {"resize": size, "normalize": "imagenet"},
            }
        )
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest
