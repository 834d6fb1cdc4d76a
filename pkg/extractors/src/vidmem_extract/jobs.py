"""Extraction job description and shared input/output plumbing."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ExtractorError(Exception):
    pass


class ModelUnavailableError(ExtractorError):
    """A required runtime (torch, cv2, diffusers) or weights file is missing."""


@dataclass(frozen=True)
class ExtractorJob:
    inputs: tuple[Path, ...]  # media paths, frame directories, or a prompt list
    out_dir: Path
    model: str = "stub"
    weights: Path | None = None
    device: str = "cpu"
    frame_cap: int = 32  # native frame rate, capped
    seed: int = 0
    force: bool = False
    extra: dict = field(default_factory=dict)


def prepare_out_dir(job: ExtractorJob) -> Path:
    out = Path(job.out_dir)
    if out.exists():
        if not out.is_dir():
            raise ExtractorError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not job.force:
            raise ExtractorError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_prompt_list(path: Path) -> list[str]:
    """One prompt per line; blank lines dropped."""
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    prompts = [line for line in lines if line]
    if not prompts:
        raise ExtractorError(f"{path}: no prompts")
    return prompts


def media_items(inputs: tuple[Path, ...]) -> list[tuple[str, Path]]:
    """Expand inputs into (id, path) pairs.

    A directory input that contains only image frames is a single video; a
    directory of videos/frame-dirs expands to one item per child, sorted.
    """
    items: list[tuple[str, Path]] = []
    for raw in inputs:
        path = Path(raw)
        if not path.exists():
            raise ExtractorError(f"{path}: does not exist")
        if path.is_file():
            items.append((path.stem, path))
        elif _is_frame_dir(path):
            items.append((path.name, path))
        else:
            children = sorted(p for p in path.iterdir() if p.is_file() or _is_frame_dir(p))
            if not children:
                raise ExtractorError(f"{path}: no media found")
            items.extend((c.stem if c.is_file() else c.name, c) for c in children)
    if len({i for i, _ in items}) != len(items):
        raise ExtractorError("duplicate media ids after expansion")
    return items


_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def _is_frame_dir(path: Path) -> bool:
    if not path.is_dir():
        return False
    files = [p for p in path.iterdir() if p.is_file()]
    return bool(files) and all(p.suffix.lower() in _IMAGE_SUFFIXES for p in files)
