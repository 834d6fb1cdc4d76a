"""Frame loading: video files via OpenCV, or directories of image frames."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .jobs import ExtractorError, ModelUnavailableError, _IMAGE_SUFFIXES


def _cv2():
    try:
        import cv2
    except ImportError as exc:
        raise ModelUnavailableError(
            "opencv is required for media decoding (pip install opencv-python-headless)"
        ) from exc
    return cv2


def load_frames(path: Path, frame_cap: int = 32) -> np.ndarray:
    """RGB frames as float32 [N, H, W, 3] in [0, 1], at most frame_cap of them.

    Sampling keeps the native order and subsamples uniformly when a clip
    exceeds the cap.
    """
    path = Path(path)
    frames = _frames_from_dir(path, frame_cap) if path.is_dir() else _frames_from_video(path, frame_cap)
    if not frames:
        raise ExtractorError(f"{path}: no decodable frames")
    return np.stack(frames).astype(np.float32) / 255.0


def _frames_from_dir(path: Path, frame_cap: int) -> list[np.ndarray]:
    cv2 = _cv2()
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    files = _subsample(files, frame_cap)
    frames = []
    for f in files:
        img = cv2.imread(str(f), cv2.IMREAD_COLOR)
        if img is None:
            raise ExtractorError(f"{f}: unreadable image")
        frames.append(cv2.cvtColor(img, cv2.COLOR_BGR2RGB))
    return frames


def _frames_from_video(path: Path, frame_cap: int) -> list[np.ndarray]:
    cv2 = _cv2()
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise ExtractorError(f"{path}: cannot open video")
    frames = []
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
    finally:
        cap.release()
    return _subsample(frames, frame_cap)


def _subsample(items: list, cap: int) -> list:
    if len(items) <= cap:
        return items
    idx = np.linspace(0, len(items) - 1, cap).round().astype(int)
    return [items[i] for i in idx]
