"""Inference-time memorization signals from denoiser noise predictions.

A prompt prone to memorization steers the conditional prediction away from
the unconditional one regardless of initialization, so the norm of their
difference is a detection signal available during sampling. The content
signal takes the worst frame; the motion signal takes the worst frame
transition; both are computed per inference step and then aggregated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LatentTrajectory

STRATEGY_FIRST = "first"
STRATEGY_FIRST_N = "first-n"
STRATEGY_ALL = "all"
STRATEGIES = (STRATEGY_FIRST, STRATEGY_FIRST_N, STRATEGY_ALL)


@dataclass(frozen=True)
class StepMagnitudes:
    step_index: int
    m_content: float
    m_motion: float


@dataclass(frozen=True)
class MagnitudeSeries:
    trajectory_id: str
    per_step: tuple[StepMagnitudes, ...]

    def to_json_dict(self) -> dict:
        return {
            "trajectory_id": self.trajectory_id,
            "steps": [
                {"step": s.step_index, "m_content": s.m_content, "m_motion": s.m_motion}
                for s in self.per_step
            ],
        }


def _as_f64(name: str, arr: np.ndarray, ndim: int) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dims, got shape {out.shape}")
    return out


def step_magnitude_image(eps_cond: np.ndarray, eps_uncond: np.ndarray) -> float:
    """L2 norm of the conditional-minus-unconditional difference of one [C, H, W] slice."""
    a = _as_f64("eps_cond", eps_cond, 3)
    b = _as_f64("eps_uncond", eps_uncond, 3)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm((a - b).ravel()))


def content_magnitude(eps_cond: np.ndarray, eps_uncond: np.ndarray) -> float:
    """Max over frames of the per-frame [C, H, W] difference norm."""
    a = _as_f64("eps_cond", eps_cond, 4)
    b = _as_f64("eps_uncond", eps_uncond, 4)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b  # [C, F, H, W]
    per_frame = np.sqrt(np.sum(diff**2, axis=(0, 2, 3)))
    return float(per_frame.max())


def motion_magnitude(eps_cond: np.ndarray, eps_uncond: np.ndarray) -> float:
    """Max over frame transitions of the transition-difference norm.

    The transition of a prediction is frame (i+1) minus frame i; constant
    per-frame offsets cancel, isolating temporal structure.
    """
    a = _as_f64("eps_cond", eps_cond, 4)
    b = _as_f64("eps_uncond", eps_uncond, 4)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[1] < 2:
        raise ValueError(f"motion magnitude needs F >= 2 frames, got F = {a.shape[1]}")
    d_cond = np.diff(a, axis=1)  # [C, F-1, H, W]
    d_uncond = np.diff(b, axis=1)
    diff = d_cond - d_uncond
    per_transition = np.sqrt(np.sum(diff**2, axis=(0, 2, 3)))
    return float(per_transition.max())


def magnitude_series(traj: LatentTrajectory) -> MagnitudeSeries:
    """Per-step (content, motion) magnitudes in the trajectory's step order."""
    out = []
    for step in traj.steps:
        try:
            mc = content_magnitude(step.eps_cond, step.eps_uncond)
            mm = motion_magnitude(step.eps_cond, step.eps_uncond)
        except ValueError as exc:
            raise ValueError(
                f"{traj.trajectory_id}: step {step.step_index}: {exc}"
            ) from exc
        out.append(StepMagnitudes(step.step_index, mc, mm))
    return MagnitudeSeries(traj.trajectory_id, tuple(out))


def aggregate(
    series: MagnitudeSeries, strategy: str, n: int | None = None
) -> tuple[float, float]:
    """Collapse a series to one (content_signal, motion_signal) pair.

    ``first`` takes the first step, ``first-n`` averages the first n steps,
    ``all`` averages every step; first-n with n == total equals all exactly.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    total = len(series.per_step)
    if total == 0:
        raise ValueError(f"{series.trajectory_id}: empty magnitude series")
    if strategy == STRATEGY_FIRST:
        take = 1
    elif strategy == STRATEGY_ALL:
        take = total
    else:
        if n is None or n < 1:
            raise ValueError("first-n requires n >= 1")
        if n > total:
            raise ValueError(f"n = {n} exceeds available steps ({total})")
        take = n
    content = sum(s.m_content for s in series.per_step[:take]) / take
    motion = sum(s.m_motion for s in series.per_step[:take]) / take
    return content, motion
