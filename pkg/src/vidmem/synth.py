"""Deterministic synthetic fixtures with planted memorization.

The generators emit ordinary VMT/manifest/label files, so the audit
pipeline cannot tell fixtures from extractor output. All randomness comes
from the counter generator in :mod:`vidmem.rng`; a (spec, seed) pair maps
to a byte-identical file tree on every run.

Construction notes, embedding side: every video gets an anchor direction
and its frames are small jitters of that anchor. Anchors are drawn by
rejection so that no two have cosine above ANCHOR_MAX_COS; independent
isotropic draws at D = 64 routinely exceed the 0.4 audit threshold once a
corpus has a few hundred videos, which would poison the planted ground
truth. Planted pairs copy one training frame into a generated video with a
unit-norm-preserving perturbation of magnitude noise_sigma.

Motion side: informative fields are a rotational/divergent base plus a
dominant per-pixel random component, which keeps direction entropy high
(so NMF retains them) while making independent fields nearly orthogonal.
Distractors are camera-panning (constant direction) and near-static fields
that NMF must discard, plus single-flow coincidental copies that punish
k = 1 audits.

Latent side: memorized trajectories carry a persistent conditional-minus-
unconditional offset with per-frame and transition structure; every step is
scaled by a per-step jitter so single-step signals overlap across the two
populations while step-averaged signals separate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import write_labels
from .rng import CounterRng
from .vmt import write_tensor

ANCHOR_MAX_COS = 0.30
ANCHOR_BATCH = 512
ANCHOR_MAX_ATTEMPTS = 2_000_000
FRAME_JITTER = 0.01
PLANT_RUN_LENGTH = 3

# stream kinds; a stream id is kind * 2^32 + item index
_S_ANCHOR = 1
_S_TRAIN_FRAMES = 2
_S_GEN_FRAMES = 3
_S_PLANT = 4
_S_FLOW_PARAMS_TRAIN = 5
_S_FLOW_PARAMS_GEN = 6
_S_FLOW_NOISE_TRAIN = 7
_S_FLOW_NOISE_GEN = 8
_S_LATENT_DIR = 9
_S_LATENT_STEP = 10


def _stream(kind: int, item: int = 0) -> int:
    return kind * (1 << 32) + item


@dataclass(frozen=True)
class FixtureSpec:
    seed: int
    n_train: int = 100
    n_generated: int = 100
    planted_pairs: int = 20
    noise_sigma: float = 0.01
    frames: int = 8
    dim: int = 64
    height: int = 16
    width: int = 16
    steps: int = 20  # latent fixtures only

    def __post_init__(self) -> None:
        if self.planted_pairs > min(self.n_train, self.n_generated):
            raise ValueError("planted_pairs must not exceed min(n_train, n_generated)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if min(self.n_train, self.n_generated, self.frames, self.dim, self.height, self.width) < 1:
            raise ValueError("all counts and shapes must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    train_manifest: Path
    gen_manifest: Path
    labels: Path


@dataclass(frozen=True)
class LatentFixturePaths:
    root: Path
    manifest: Path
    labels: Path
    trajectory_dirs: tuple[Path, ...]


def _write_manifest(path: Path, entries: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _draw_anchors(rng: CounterRng, count: int, dim: int) -> np.ndarray:
    """Unit anchors with pairwise cosine below ANCHOR_MAX_COS, by rejection."""
    accepted = np.zeros((count, dim), dtype=np.float64)
    n_accepted = 0
    offset = 0
    while n_accepted < count:
        if offset >= ANCHOR_MAX_ATTEMPTS * dim:
            raise ValueError(
                f"could not place {count} anchors in {dim} dims below"
                f" cosine {ANCHOR_MAX_COS}; use a larger dim or fewer items"
            )
        block = rng.normals(_stream(_S_ANCHOR), ANCHOR_BATCH * dim, offset)
        offset += ANCHOR_BATCH * dim
        cands = block.reshape(ANCHOR_BATCH, dim)
        cands /= np.linalg.norm(cands, axis=1, keepdims=True)
        against = cands @ accepted[:n_accepted].T if n_accepted else None
        within = cands @ cands.T
        for b in range(ANCHOR_BATCH):
            if n_accepted == count:
                break
            if against is not None and against[b].size and against[b].max() >= ANCHOR_MAX_COS:
                continue
            accepted[n_accepted] = cands[b]
            n_accepted += 1
            if against is None:
                against = cands @ accepted[:n_accepted].T
            else:
                against = np.concatenate([against, within[:, b : b + 1]], axis=1)
    return accepted


def _video_embeddings(rng: CounterRng, kind: int, item: int, anchor: np.ndarray, frames: int) -> np.ndarray:
    dim = anchor.shape[0]
    jit = rng.normals(_stream(kind, item), frames * dim).reshape(frames, dim)
    rows = anchor[None, :] + FRAME_JITTER * jit
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)


def generate_content_fixture(spec: FixtureSpec, out_dir: str | Path) -> FixturePaths:
    """Embedding fixture: train/gen manifests, VMT files, planted ground truth."""
    root = Path(out_dir)
    train_dir = root / "train"
    gen_dir = root / "gen"
    train_dir.mkdir(parents=True, exist_ok=True)
    gen_dir.mkdir(parents=True, exist_ok=True)
    rng = CounterRng(spec.seed)

    anchors = _draw_anchors(rng, spec.n_train + spec.n_generated, spec.dim)
    train_rows = [
        _video_embeddings(rng, _S_TRAIN_FRAMES, t, anchors[t], spec.frames)
        for t in range(spec.n_train)
    ]
    gen_rows = [
        _video_embeddings(rng, _S_GEN_FRAMES, g, anchors[spec.n_train + g], spec.frames)
        for g in range(spec.n_generated)
    ]

    for p in range(spec.planted_pairs):
        picks = rng.integers(_stream(_S_PLANT, p), 2, spec.frames)
        tf, gf = int(picks[0]), int(picks[1])
        source = train_rows[p][tf].astype(np.float64)
        if spec.noise_sigma > 0:
            noise = rng.normals(_stream(_S_PLANT, p), spec.dim, offset=16)
            gen_rows[p][gf] = _unit(source + spec.noise_sigma * noise).astype(np.float32)
        else:
            gen_rows[p][gf] = source.astype(np.float32)

    train_entries, gen_entries, labels = [], [], []
    for t, rows in enumerate(train_rows):
        name = f"emb_{t:04d}.vmt"
        write_tensor(rows, train_dir / name)
        train_entries.append({"id": f"train_{t:04d}", "embedding_path": name})
    for g, rows in enumerate(gen_rows):
        name = f"emb_{g:04d}.vmt"
        write_tensor(rows, gen_dir / name)
        gen_entries.append({"id": f"gen_{g:04d}", "embedding_path": name})
        labels.append((f"gen_{g:04d}", 1 if g < spec.planted_pairs else 0))

    train_manifest = train_dir / "manifest.jsonl"
    gen_manifest = gen_dir / "manifest.jsonl"
    labels_path = root / "labels.csv"
    _write_manifest(train_manifest, train_entries)
    _write_manifest(gen_manifest, gen_entries)
    write_labels(labels_path, labels)
    return FixturePaths(root, train_manifest, gen_manifest, labels_path)


def _informative_flows(
    rng: CounterRng, params_kind: int, noise_kind: int, item: int, m: int, h: int, w: int
) -> np.ndarray:
    """Rotation/divergence base plus dominant per-pixel noise; entropy-rich."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    params = rng.uniforms(_stream(params_kind, item), 4 * m).reshape(m, 4)
    noise = rng.normals(_stream(noise_kind, item), m * 2 * h * w).reshape(m, 2, h, w)
    flows = np.empty((m, 2, h, w), dtype=np.float64)
    for i in range(m):
        cx = (0.25 + 0.5 * params[i, 0]) * (w - 1)
        cy = (0.25 + 0.5 * params[i, 1]) * (h - 1)
        psi = 2.0 * np.pi * params[i, 2]
        scale = 0.05 + 0.08 * params[i, 3]
        rx, ry = xs - cx, ys - cy
        rot = np.stack([-ry, rx])
        div = np.stack([rx, ry])
        base = scale * (np.cos(psi) * rot + np.sin(psi) * div)
        flows[i] = base + 2.0 * noise[i]
    return flows.astype(np.float32)


def _panning_flows(rng: CounterRng, params_kind: int, item: int, m: int, h: int, w: int) -> np.ndarray:
    params = rng.uniforms(_stream(params_kind, item), 2 * m).reshape(m, 2)
    flows = np.empty((m, 2, h, w), dtype=np.float64)
    for i in range(m):
        mag = 1.5 + 2.0 * params[i, 0]
        psi = 2.0 * np.pi * params[i, 1]
        flows[i, 0] = mag * np.cos(psi)
        flows[i, 1] = mag * np.sin(psi)
    return flows.astype(np.float32)


def _static_flows(rng: CounterRng, noise_kind: int, item: int, m: int, h: int, w: int) -> np.ndarray:
    noise = rng.normals(_stream(noise_kind, item), m * 2 * h * w).reshape(m, 2, h, w)
    return (0.06 * noise).astype(np.float32)


def generate_motion_fixture(spec: FixtureSpec, out_dir: str | Path) -> FixturePaths:
    """Flow fixture with planted runs, coincidental single-flow matches, and
    panning/static distractor pairs that NMF must reject."""
    m = spec.frames - 1
    if m < 1:
        raise ValueError("motion fixture needs frames >= 2")
    run_len = min(PLANT_RUN_LENGTH, m)
    has_distractors = spec.n_generated > spec.planted_pairs
    if has_distractors and spec.n_train < spec.planted_pairs + 2:
        raise ValueError("motion fixture needs n_train >= planted_pairs + 2 for distractor sources")

    root = Path(out_dir)
    train_dir = root / "train"
    gen_dir = root / "gen"
    train_dir.mkdir(parents=True, exist_ok=True)
    gen_dir.mkdir(parents=True, exist_ok=True)
    rng = CounterRng(spec.seed)
    h, w = spec.height, spec.width

    train_flows: list[np.ndarray] = []
    informative_train: list[int] = []
    for t in range(spec.n_train):
        if t < spec.planted_pairs:
            category = "informative"
        else:
            category = ("panning", "static", "informative")[(t - spec.planted_pairs) % 3]
        if category == "informative":
            flows = _informative_flows(
                rng, _S_FLOW_PARAMS_TRAIN, _S_FLOW_NOISE_TRAIN, t, m, h, w
            )
            informative_train.append(t)
        elif category == "panning":
            flows = _panning_flows(rng, _S_FLOW_PARAMS_TRAIN, t, m, h, w)
        else:
            flows = _static_flows(rng, _S_FLOW_NOISE_TRAIN, t, m, h, w)
        train_flows.append(flows)
    if has_distractors and not informative_train:
        raise ValueError(
            "motion fixture needs at least one informative training item;"
            " raise n_train or planted_pairs"
        )
    first_panning = spec.planted_pairs if spec.n_train > spec.planted_pairs else None
    first_static = spec.planted_pairs + 1 if spec.n_train > spec.planted_pairs + 1 else None

    gen_flows: list[np.ndarray] = []
    labels: list[tuple[str, int]] = []
    for g in range(spec.n_generated):
        own = _informative_flows(rng, _S_FLOW_PARAMS_GEN, _S_FLOW_NOISE_GEN, g, m, h, w)
        label = 0
        if g < spec.planted_pairs:
            picks = rng.integers(_stream(_S_PLANT, g), 2, max(m - run_len + 1, 1))
            src_start, dst_start = int(picks[0]), int(picks[1])
            run = train_flows[g][src_start : src_start + run_len].astype(np.float64)
            if spec.noise_sigma > 0:
                noise = rng.normals(
                    _stream(_S_PLANT, g), run.size, offset=16
                ).reshape(run.shape)
                run = run + spec.noise_sigma * noise
            own[dst_start : dst_start + run_len] = run.astype(np.float32)
            label = 1
        else:
            category = ("coincidental", "panning", "static", "random")[
                (g - spec.planted_pairs) % 4
            ]
            if category == "coincidental":
                src = informative_train[g % len(informative_train)]
                picks = rng.integers(_stream(_S_PLANT, g), 2, m)
                own[int(picks[1])] = train_flows[src][int(picks[0])]
            elif category == "panning" and first_panning is not None:
                own = train_flows[first_panning].copy()
            elif category == "static" and first_static is not None:
                own = train_flows[first_static].copy()
        gen_flows.append(own)
        labels.append((f"gen_{g:04d}", label))

    train_entries, gen_entries = [], []
    for t, flows in enumerate(train_flows):
        name = f"flow_{t:04d}.vmt"
        write_tensor(flows, train_dir / name)
        train_entries.append({"id": f"train_{t:04d}", "flow_path": name})
    for g, flows in enumerate(gen_flows):
        name = f"flow_{g:04d}.vmt"
        write_tensor(flows, gen_dir / name)
        gen_entries.append({"id": f"gen_{g:04d}", "flow_path": name})

    train_manifest = train_dir / "manifest.jsonl"
    gen_manifest = gen_dir / "manifest.jsonl"
    labels_path = root / "labels.csv"
    _write_manifest(train_manifest, train_entries)
    _write_manifest(gen_manifest, gen_entries)
    write_labels(labels_path, labels)
    return FixturePaths(root, train_manifest, gen_manifest, labels_path)


def generate_latent_fixture(spec: FixtureSpec, out_dir: str | Path) -> LatentFixturePaths:
    """Latent-trajectory fixture: planted trajectories carry a persistent
    structured offset; per-step jitter makes single-step signals noisy."""
    if spec.frames < 2:
        raise ValueError("latent fixture needs frames >= 2")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = CounterRng(spec.seed)
    c, f, h, w = spec.dim, spec.frames, spec.height, spec.width
    cell = 1.0 / np.sqrt(c * h * w)

    entries = []
    labels: list[tuple[str, int]] = []
    dirs: list[Path] = []
    for t in range(spec.n_generated):
        traj_id = f"traj_{t:04d}"
        traj_dir = root / traj_id
        traj_dir.mkdir(exist_ok=True)
        dirs.append(traj_dir)
        memorized = t < spec.planted_pairs

        if memorized:
            dir_stream = _stream(_S_LATENT_DIR, t)
            base = rng.normals(dir_stream, 2 * c * h * w)
            phase = 2.0 * np.pi * rng.uniforms(dir_stream, 1, 4 * c * h * w)[0]
            ab = (cell * base).reshape(2, c, h, w)
            fr = np.arange(f)
            cosF = np.cos(2.0 * np.pi * fr / f + phase)
            sinF = np.sin(2.0 * np.pi * fr / f + phase)
            offset = (
                ab[0][:, None, :, :] * cosF[None, :, None, None]
                + ab[1][:, None, :, :] * sinF[None, :, None, None]
            )

        for s in range(spec.steps):
            stream = _stream(_S_LATENT_STEP, t * 100_000 + s)
            width = 2 * c * f * h * w
            block = rng.normals(stream, width)
            bg = block[: c * f * h * w].reshape(c, f, h, w)
            noise = cell * block[c * f * h * w :].reshape(c, f, h, w)
            jitter = 0.5 + rng.uniforms(stream, 1, 2 * width)[0]  # in [0.5, 1.5)
            if memorized:
                diff = jitter * (offset + 0.35 * noise)
            else:
                diff = jitter * 0.66 * noise
            eps_uncond = bg.astype(np.float32)
            eps_cond = (bg + diff).astype(np.float32)
            write_tensor(eps_cond, traj_dir / f"step_{s:04d}_cond.vmt")
            write_tensor(eps_uncond, traj_dir / f"step_{s:04d}_uncond.vmt")

        entries.append({"id": traj_id, "latent_dir": traj_id})
        labels.append((traj_id, 1 if memorized else 0))

    manifest = root / "manifest.jsonl"
    labels_path = root / "labels.csv"
    _write_manifest(manifest, entries)
    write_labels(labels_path, labels)
    return LatentFixturePaths(root, manifest, labels_path, tuple(dirs))
