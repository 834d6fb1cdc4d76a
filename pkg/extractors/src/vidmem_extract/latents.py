"""Denoiser latent capture: per-step conditional/unconditional noise predictions.

The capture hooks the denoiser itself and records both predictions BEFORE
any guidance mixing, which is what the detection signals are defined on.
Pipelines that batch [uncond, cond] through one denoiser call (the standard
classifier-free guidance layout) are supported; a pipeline that only
exposes already-guided outputs cannot be unmixed, so the adapter refuses.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .jobs import ExtractorError, ExtractorJob, ModelUnavailableError, prepare_out_dir, read_prompt_list
from .vmtio import write_manifest, write_vmt


def split_guidance_batch(noise_pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a CFG-batched prediction [2, C, F, H, W] into (uncond, cond)."""
    if noise_pred.ndim != 5 or noise_pred.shape[0] != 2:
        raise ExtractorError(
            f"expected a CFG batch [2, C, F, H, W], got shape {noise_pred.shape};"
            " pipelines exposing only guided outputs are not supported"
        )
    return noise_pred[0], noise_pred[1]


class LatentCapture:
    """Collects (step, eps_cond, eps_uncond) triples during sampling."""

    def __init__(self) -> None:
        self.steps: list[tuple[int, np.ndarray, np.ndarray]] = []

    def record(self, step_index: int, noise_pred: np.ndarray) -> None:
        eps_uncond, eps_cond = split_guidance_batch(noise_pred)
        self.steps.append((step_index, eps_cond.copy(), eps_uncond.copy()))

    def write(self, traj_dir: Path) -> None:
        if not self.steps:
            raise ExtractorError("no steps captured")
        traj_dir.mkdir(parents=True, exist_ok=True)
        for step_index, eps_cond, eps_uncond in self.steps:
            write_vmt(eps_cond, traj_dir / f"step_{step_index:04d}_cond.vmt")
            write_vmt(eps_uncond, traj_dir / f"step_{step_index:04d}_uncond.vmt")


def extract_latents(job: ExtractorJob, steps: int = 50) -> Path:
    """Run a text-to-video diffusion pipeline over a prompt list, capturing latents."""
    try:
        import torch
        from diffusers import DiffusionPipeline
    except ImportError as exc:
        raise ModelUnavailableError(
            "torch and diffusers are required for latent capture"
        ) from exc

    (prompt_file,) = job.inputs
    prompts = read_prompt_list(Path(prompt_file))
    out = prepare_out_dir(job)
    if job.model in ("stub", ""):
        raise ModelUnavailableError("latent capture needs a diffusers model id via --model")
    pipe = DiffusionPipeline.from_pretrained(job.model)
    pipe.to(job.device)
    unet = pipe.unet

    entries = []
    for p, prompt in enumerate(prompts):
        capture = LatentCapture()
        counter = {"i": 0}
        original_forward = unet.forward

        def recording_forward(sample, timestep, *args, **kwargs):
            result = original_forward(sample, timestep, *args, **kwargs)
            pred = result[0] if isinstance(result, tuple) else result.sample
            capture.record(counter["i"], pred.detach().cpu().float().numpy())
            counter["i"] += 1
            return result

        unet.forward = recording_forward
        try:
            generator = torch.Generator(device="cpu").manual_seed(job.seed + p)
            pipe(prompt, num_inference_steps=steps, generator=generator)
        finally:
            unet.forward = original_forward
        traj_id = f"prompt_{p:04d}"
        capture.write(out / traj_id)
        entries.append({"id": traj_id, "latent_dir": traj_id, "caption": prompt, "model": job.model})
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest
