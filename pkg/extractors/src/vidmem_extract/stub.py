"""Deterministic fake extractor for contract tests.

Outputs are a pure function of (seed, item id), so two runs over the same
inputs are byte-identical and re-running with the same seed reproduces the
exact files. Randomness is SplitMix64-derived:

    mix(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2^64)
            z = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2^64)
            z ^ (z >> 31)
    stream(seed, name) = mix(mix(seed ^ SALT) + fnv1a64(name) * GAMMA)
    word_i = mix(stream + (i + 1) * GAMMA)
    uniform_i = (word_i >> 11) * 2^-53
    normal_j = sqrt(-2 ln(1 - u_{2j})) * cos(2 pi u_{2j+1})
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .jobs import ExtractorJob, media_items, prepare_out_dir, read_prompt_list
from .vmtio import write_manifest, write_vmt

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xA0761D6478BD642F)

EMB_FRAMES = 16
EMB_DIM = 512
FLOW_FIELDS = 7
FLOW_SIZE = 32
FEAT_DIM = 512
LATENT_STEPS = 50
LATENT_SHAPE = (4, 8, 8, 8)  # C, F, H, W


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _fnv1a64(name: str) -> int:
    h = 0xCBF29CE484222325
    for byte in name.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _normals(seed: int, name: str, count: int) -> np.ndarray:
    name_key = np.asarray([_fnv1a64(name)], dtype=np.uint64)
    stream = _mix(_mix(np.asarray([seed], dtype=np.uint64) ^ _SALT) + name_key * _GAMMA)
    idx = np.arange(1, 2 * count + 1, dtype=np.uint64)
    u = (_mix(stream + idx * _GAMMA) >> np.uint64(11)) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
    return r * np.cos(2.0 * np.pi * u[1::2])


def stub_embeddings(job: ExtractorJob) -> Path:
    out = prepare_out_dir(job)
    entries = []
    for item_id, _ in media_items(job.inputs):
        rows = _normals(job.seed, f"emb/{item_id}", EMB_FRAMES * EMB_DIM).reshape(
            EMB_FRAMES, EMB_DIM
        )
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        name = f"{item_id}.vmt"
        write_vmt(rows.astype(np.float32), out / name)
        entries.append(
            {"id": item_id, "embedding_path": name, "frames": EMB_FRAMES, "model": "stub"}
        )
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest


def stub_flows(job: ExtractorJob) -> Path:
    out = prepare_out_dir(job)
    entries = []
    for item_id, _ in media_items(job.inputs):
        raw = _normals(job.seed, f"flow/{item_id}", FLOW_FIELDS * 2 * FLOW_SIZE * FLOW_SIZE)
        flows = 2.0 * raw.reshape(FLOW_FIELDS, 2, FLOW_SIZE, FLOW_SIZE)
        name = f"{item_id}.vmt"
        write_vmt(flows.astype(np.float32), out / name)
        entries.append(
            {"id": item_id, "flow_path": name, "frames": FLOW_FIELDS + 1, "model": "stub"}
        )
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest


def stub_features(job: ExtractorJob) -> Path:
    out = prepare_out_dir(job)
    entries = []
    for item_id, _ in media_items(job.inputs):
        vec = _normals(job.seed, f"feat/{item_id}", FEAT_DIM)
        name = f"{item_id}.vmt"
        write_vmt(vec.astype(np.float32), out / name)
        entries.append(
            {
                "id": item_id,
                "feature_path": name,
                "caption": f"stub clip {item_id}",
                "model": "stub",
            }
        )
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest


def stub_latents(job: ExtractorJob, steps: int = LATENT_STEPS) -> Path:
    (prompt_file,) = job.inputs
    prompts = read_prompt_list(Path(prompt_file))
    out = prepare_out_dir(job)
    entries = []
    size = int(np.prod(LATENT_SHAPE))
    for p, prompt in enumerate(prompts):
        traj_id = f"prompt_{p:04d}"
        traj_dir = out / traj_id
        traj_dir.mkdir(exist_ok=True)
        for s in range(steps):
            block = _normals(job.seed, f"lat/{traj_id}/{s}", 2 * size)
            eps_cond = block[:size].reshape(LATENT_SHAPE).astype(np.float32)
            eps_uncond = block[size:].reshape(LATENT_SHAPE).astype(np.float32)
            write_vmt(eps_cond, traj_dir / f"step_{s:04d}_cond.vmt")
            write_vmt(eps_uncond, traj_dir / f"step_{s:04d}_uncond.vmt")
        entries.append({"id": traj_id, "latent_dir": traj_id, "caption": prompt, "model": "stub"})
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest
