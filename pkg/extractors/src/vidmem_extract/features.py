"""Whole-video feature vectors for duplication analysis.

Accepts any TorchScript spatiotemporal network called as model(clip) with
clip [1, 3, T, S, S], returning [1, D] (Kinetics-pretrained inflated-3D
style checkpoints follow this convention).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .embeddings import _load_scripted, _torch
from .jobs import ExtractorJob, ModelUnavailableError, media_items, prepare_out_dir
from .media import load_frames
from .vmtio import write_id_caption_csv, write_manifest, write_vmt

DEFAULT_SIZE = 224


def extract_dataset_features(job: ExtractorJob) -> Path:
    torch = _torch()
    model = _load_scripted(job.weights, "feature extraction")
    size = int(job.extra.get("size", DEFAULT_SIZE))
    captions: dict[str, str] = job.extra.get("captions", {})
    out = prepare_out_dir(job)
    entries = []
    sidecar_rows = []
    for item_id, path in media_items(job.inputs):
        frames = load_frames(path, job.frame_cap)
        x = torch.from_numpy(frames).permute(3, 0, 1, 2).unsqueeze(0)  # [1, 3, T, H, W]
        x = torch.nn.functional.interpolate(
            x, size=(frames.shape[0], size, size), mode="trilinear", align_corners=False
        )
        with torch.no_grad():
            feat = model(x.to(job.device)).cpu().numpy().reshape(-1)
        if feat.ndim != 1 or feat.size < 2:
            raise ModelUnavailableError(f"model returned shape {feat.shape}, expected [D]")
        name = f"{item_id}.vmt"
        write_vmt(feat.astype(np.float32), out / name)
        entry = {"id": item_id, "feature_path": name, "model": str(job.weights)}
        if item_id in captions:
            entry["caption"] = captions[item_id]
            sidecar_rows.append((item_id, captions[item_id]))
        entries.append(entry)
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    if sidecar_rows:
        write_id_caption_csv(out / "captions.csv", sidecar_rows)
    return manifest
