"""Domain containers and loaders built on the VMT tensor format.

All containers are plain frozen dataclasses holding numpy arrays; they are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError, LabelFileError, ManifestError
from .vmt import read_tensor

_MIN_ROW_NORM = 1e-12


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-frame embedding matrix for one video; a single image is N == 1."""

    video_id: str
    embeddings: np.ndarray  # [N, D] float32, rows unit-norm

    @property
    def n_frames(self) -> int:
        return self.embeddings.shape[0]

    @property
    def width(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class FlowSequence:
    """Optical-flow fields for one video: M fields of shape [2, H, W]."""

    video_id: str
    flows: np.ndarray  # [M, 2, H, W] float32, displacement in pixels

    @property
    def n_flows(self) -> int:
        return self.flows.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.flows.shape[2], self.flows.shape[3]


@dataclass(frozen=True)
class TrajectoryStep:
    step_index: int
    eps_cond: np.ndarray  # [C, F, H, W]
    eps_uncond: np.ndarray  # [C, F, H, W]


@dataclass(frozen=True)
class LatentTrajectory:
    """Per-inference-step conditional/unconditional noise predictions."""

    trajectory_id: str
    steps: tuple[TrajectoryStep, ...]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.steps[0].eps_cond.shape


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    caption: str | None = None
    embedding_path: Path | None = None
    flow_path: Path | None = None
    feature_path: Path | None = None
    latent_dir: Path | None = None
    frames: int | None = None
    height: int | None = None
    width: int | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def normalize_rows(matrix: np.ndarray, *, what: str = "embedding") -> np.ndarray:
    """L2-normalize each row; a (near-)zero row is treated as extractor breakage."""
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms < _MIN_ROW_NORM)
    if bad.size:
        raise DataError(f"{what} row {int(bad[0])} has zero norm")
    return (matrix / norms[:, None]).astype(np.float32)


def make_embedding_sequence(video_id: str, embeddings: np.ndarray) -> EmbeddingSequence:
    """Validate and normalize an in-memory [N, D] matrix into an EmbeddingSequence."""
    arr = np.asarray(embeddings, dtype=np.float32)
    if arr.ndim != 2:
        raise DataError(f"{video_id}: embeddings must be [N, D], got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{video_id}: empty embedding matrix {arr.shape}")
    return EmbeddingSequence(video_id, normalize_rows(arr, what=f"{video_id} embedding"))


def load_embedding_sequence(path: str | Path, video_id: str) -> EmbeddingSequence:
    return make_embedding_sequence(video_id, read_tensor(path))


def make_flow_sequence(video_id: str, flows: np.ndarray) -> FlowSequence:
    arr = np.asarray(flows, dtype=np.float32)
    if arr.ndim != 4 or arr.shape[1] != 2:
        raise DataError(
            f"{video_id}: flows must be [M, 2, H, W], got shape {arr.shape}"
        )
    if arr.shape[0] < 1 or arr.shape[2] < 1 or arr.shape[3] < 1:
        raise DataError(f"{video_id}: degenerate flow shape {arr.shape}")
    return FlowSequence(video_id, arr)


def load_flow_sequence(path: str | Path, video_id: str) -> FlowSequence:
    return make_flow_sequence(video_id, read_tensor(path))


_STEP_FILE = re.compile(r"^step_(\d{4,})_cond\.vmt$")


def load_latent_trajectory(directory: str | Path, trajectory_id: str | None = None) -> LatentTrajectory:
    """Load a trajectory directory of step_{t:04d}_{cond,uncond}.vmt pairs."""
    directory = Path(directory)
    if trajectory_id is None:
        trajectory_id = directory.name
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")

    found: list[tuple[int, str]] = []
    for p in directory.iterdir():
        m = _STEP_FILE.match(p.name)
        if m:
            found.append((int(m.group(1)), p.name))
    found.sort()

    steps: list[TrajectoryStep] = []
    for step_index, name in found:
        cond_path = directory / name
        uncond_path = directory / f"step_{step_index:04d}_uncond.vmt"
        if not uncond_path.exists():
            raise DataError(f"{directory}: missing {uncond_path.name}")
        eps_cond = read_tensor(cond_path)
        eps_uncond = read_tensor(uncond_path)
        for arr, which in ((eps_cond, "cond"), (eps_uncond, "uncond")):
            if arr.ndim != 4:
                raise DataError(
                    f"{directory}: step {step_index} {which} tensor must be"
                    f" [C, F, H, W], got shape {arr.shape}"
                )
        if eps_cond.shape != eps_uncond.shape:
            raise DataError(
                f"{directory}: step {step_index} cond/uncond shape mismatch"
                f" {eps_cond.shape} vs {eps_uncond.shape}"
            )
        steps.append(TrajectoryStep(step_index, eps_cond, eps_uncond))

    if not steps:
        raise DataError(f"{directory}: no step files found")
    shape = steps[0].eps_cond.shape
    for s in steps[1:]:
        if s.eps_cond.shape != shape:
            raise DataError(
                f"{directory}: step {s.step_index} shape {s.eps_cond.shape}"
                f" differs from {shape}"
            )
    if shape[1] < 2:
        raise DataError(f"{directory}: needs F >= 2 frames, got F = {shape[1]}")
    indices = [s.step_index for s in steps]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DataError(f"{directory}: step indices not strictly increasing: {indices}")
    return LatentTrajectory(trajectory_id, tuple(steps))


_PATH_FIELDS = ("embedding_path", "flow_path", "feature_path", "latent_dir")
_INT_FIELDS = ("frames", "height", "width")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON Lines manifest; paths resolve relative to the manifest's directory."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj:
                raise ManifestError(f"{path}:{lineno}: entry must be an object with an 'id'")
            entry_id = obj["id"]
            if not isinstance(entry_id, str) or not entry_id:
                raise ManifestError(f"{path}:{lineno}: 'id' must be a non-empty string")
            if entry_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {entry_id!r}")
            seen.add(entry_id)

            kwargs: dict = {"id": entry_id}
            caption = obj.get("caption")
            if caption is not None and not isinstance(caption, str):
                raise ManifestError(f"{path}:{lineno}: caption must be a string")
            kwargs["caption"] = caption
            for key in _PATH_FIELDS:
                value = obj.get(key)
                if value is None:
                    continue
                resolved = (base / value).resolve()
                if not resolved.exists():
                    raise ManifestError(
                        f"{path}:{lineno}: {key} {value!r} does not exist"
                    )
                kwargs[key] = resolved
            for key in _INT_FIELDS:
                value = obj.get(key)
                if value is None:
                    continue
                if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                    raise ManifestError(f"{path}:{lineno}: {key} must be a positive integer")
                kwargs[key] = value
            entries.append(ManifestEntry(**kwargs))
    return DatasetManifest(tuple(entries))


def load_labels(path: str | Path) -> dict[str, int]:
    """Read an id,label CSV into an ordered mapping; labels must be 0 or 1."""
    path = Path(path)
    labels: dict[str, int] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LabelFileError(f"{path}: empty label file") from None
        if [h.strip() for h in header] != ["id", "label"]:
            raise LabelFileError(f"{path}: expected header 'id,label', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise LabelFileError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            item_id, raw = row[0], row[1].strip()
            if item_id in labels:
                raise LabelFileError(f"{path}:{lineno}: duplicate id {item_id!r}")
            if raw not in ("0", "1"):
                raise LabelFileError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
            labels[item_id] = int(raw)
    return labels


def write_labels(path: str | Path, labels: list[tuple[str, int]]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"])
        for item_id, label in labels:
            writer.writerow([item_id, label])
