"""Optical flow over consecutive frame pairs.

Two model routes: the torchvision RAFT (large) network when its weights are
locally available, or any TorchScript module called as model(img1, img2)
returning [B, 2, H, W] pixel displacements.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .embeddings import _load_scripted, _torch
from .jobs import ExtractorError, ExtractorJob, ModelUnavailableError, media_items, prepare_out_dir
from .media import load_frames
from .vmtio import write_manifest, write_vmt


def _raft_large(device: str):
    torch = _torch()
    try:
        from torchvision.models.optical_flow import Raft_Large_Weights, raft_large
    except ImportError as exc:
        raise ModelUnavailableError("torchvision is required for the raft model") from exc
    try:
        model = raft_large(weights=Raft_Large_Weights.DEFAULT)
    except Exception as exc:  # weights not cached and no network
        raise ModelUnavailableError(f"cannot load RAFT weights: {exc}") from exc
    model.eval()
    return model.to(device)


def _flow_batch(model, model_kind: str, img1, img2):
    torch = _torch()
    with torch.no_grad():
        if model_kind == "raft":
            return model(img1, img2)[-1]  # final refinement iterate
        return model(img1, img2)


def extract_flows(job: ExtractorJob) -> Path:
    torch = _torch()
    if job.model == "raft":
        model = _raft_large(job.device)
    else:
        model = _load_scripted(job.weights, "flow extraction")
    out = prepare_out_dir(job)
    entries = []
    for item_id, path in media_items(job.inputs):
        frames = load_frames(path, job.frame_cap)
        if frames.shape[0] < 2:
            raise ExtractorError(f"{item_id}: needs at least 2 frames for flow")
        # RAFT expects [-1, 1]-scaled RGB
        x = torch.from_numpy(frames).permute(0, 3, 1, 2).to(job.device) * 2.0 - 1.0
        flow = _flow_batch(model, job.model, x[:-1], x[1:]).cpu().numpy()
        if flow.ndim != 4 or flow.shape[1] != 2:
            raise ModelUnavailableError(f"model returned shape {flow.shape}, expected [M, 2, H, W]")
        name = f"{item_id}.vmt"
        write_vmt(flow.astype(np.float32), out / name)
        entries.append(
            {
                "id": item_id,
                "flow_path": name,
                "frames": int(frames.shape[0]),
                "height": int(flow.shape[2]),
                "width": int(flow.shape[3]),
                "model": job.model if job.model == "raft" else str(job.weights),
            }
        )
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest
