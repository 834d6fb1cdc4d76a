"""vidmem command line: audits, detection, dedup, evaluation, fixtures.

Exit codes: 0 success, 2 config error, 3 data error, 4 internal error.
Reports are JSON, written atomically (temp file + rename), and always embed
the resolved config plus a format-version field. Flag precedence is
CLI > config file > defaults; VIDMEM_WORKERS is the worker-count fallback.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click

from . import __version__
from .data import (
    load_embedding_sequence,
    load_flow_sequence,
    load_latent_trajectory,
    load_manifest,
)
from .dedup import (
    curate_prompts,
    duplication_counts,
    load_feature_index,
    load_feature_index_from_matrix,
    topk_neighbors,
    write_prompt_csv,
)
from .detection import STRATEGIES, STRATEGY_ALL, STRATEGY_FIRST_N, aggregate, magnitude_series
from .estimators import ContentMemorizationAuditor, MotionMemorizationAuditor
from .evaluation import AuditConfig, auc, best_f1, f1_at, load_scored_csv, summarize
from .exceptions import ConfigError, DataError, VidmemError
from .synth import FixtureSpec, generate_content_fixture, generate_latent_fixture, generate_motion_fixture

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
FORMAT_VERSION = 1


def _fail(code: int, message: str) -> None:
    click.echo(f"vidmem: error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exceptions onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except (DataError, OSError) as exc:
            _fail(EXIT_DATA, str(exc))
        except click.ClickException:
            raise
        except VidmemError as exc:
            _fail(EXIT_INTERNAL, str(exc))
        except Exception as exc:  # noqa: BLE001
            _fail(EXIT_INTERNAL, f"{type(exc).__name__}: {exc}")

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_config_file(path: str | None, known: set[str]) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def _resolve(defaults: dict, file_cfg: dict, flags: dict) -> dict:
    resolved = dict(defaults)
    resolved.update({k: v for k, v in file_cfg.items() if v is not None})
    resolved.update({k: v for k, v in flags.items() if v is not None})
    return resolved


def _resolve_workers(flag: int | None, file_cfg: dict) -> int:
    if flag is not None:
        value = flag
    elif file_cfg.get("workers") is not None:
        value = file_cfg["workers"]
    elif os.environ.get("VIDMEM_WORKERS"):
        try:
            value = int(os.environ["VIDMEM_WORKERS"])
        except ValueError as exc:
            raise ConfigError(f"bad VIDMEM_WORKERS value: {os.environ['VIDMEM_WORKERS']!r}") from exc
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError(f"workers must be >= 1, got {value}")
    return value


def _atomic_write_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _load_embedding_manifest(path: str, what: str):
    manifest = load_manifest(path)
    if len(manifest) == 0:
        raise DataError(f"{what} manifest {path} is empty")
    sequences = []
    for entry in manifest:
        if entry.embedding_path is None:
            raise DataError(f"{what} manifest entry {entry.id!r} lacks embedding_path")
        sequences.append(load_embedding_sequence(entry.embedding_path, entry.id))
    return sequences


def _load_flow_manifest(path: str, what: str):
    manifest = load_manifest(path)
    if len(manifest) == 0:
        raise DataError(f"{what} manifest {path} is empty")
    sequences = []
    for entry in manifest:
        if entry.flow_path is None:
            raise DataError(f"{what} manifest entry {entry.id!r} lacks flow_path")
        sequences.append(load_flow_sequence(entry.flow_path, entry.id))
    return sequences


@click.group()
@click.version_option(version=__version__, prog_name="vidmem")
def main() -> None:
    """Memorization audit toolkit for video diffusion models."""


@main.command("audit-content")
@click.argument("gen_manifest", type=click.Path(exists=True, dir_okay=False))
@click.argument("train_manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--gsscd-threshold", type=float, default=None, help="Memorization threshold (default 0.4).")
@click.option("--block-size", type=int, default=None, help="Training frames per similarity block.")
@click.option("--workers", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def cmd_audit_content(gen_manifest, train_manifest, gsscd_threshold, block_size, workers, config_path, out):
    """Audit generated embeddings against a training index."""
    defaults = {"gsscd_threshold": 0.4, "block_size": 4096}
    file_cfg = _load_config_file(config_path, set(defaults) | {"workers"})
    cfg = _resolve(defaults, file_cfg, {"gsscd_threshold": gsscd_threshold, "block_size": block_size})
    n_workers = _resolve_workers(workers, file_cfg)
    if not (-1.0 <= cfg["gsscd_threshold"] <= 1.0):
        raise ConfigError(f"gsscd-threshold must be in [-1, 1], got {cfg['gsscd_threshold']}")
    if cfg["block_size"] < 1:
        raise ConfigError(f"block-size must be >= 1, got {cfg['block_size']}")

    gen = _load_embedding_manifest(gen_manifest, "generated")
    train = _load_embedding_manifest(train_manifest, "training")
    auditor = ContentMemorizationAuditor(
        threshold=cfg["gsscd_threshold"], block_size=cfg["block_size"], workers=n_workers
    ).fit(train)
    records = auditor.audit(gen)
    summary = summarize(records, AuditConfig(gsscd_threshold=cfg["gsscd_threshold"]))

    resolved = dict(cfg, workers=n_workers, gen_manifest=str(gen_manifest), train_manifest=str(train_manifest))
    _atomic_write_json(out, {
        "format_version": FORMAT_VERSION,
        "kind": "audit-content",
        "config": resolved,
        "records": [
            {
                "gen_id": r.gen_id,
                "train_id": r.content_train_id,
                "score": r.gsscd_score,
                "gen_frame": r.gsscd_gen_index,
                "train_frame": r.gsscd_train_index,
                "memorized": r.content_memorized,
            }
            for r in records
        ],
        "summary": summary.to_json_dict(),
    })
    click.echo(f"audited {len(records)} generated items -> {out}")


@main.command("audit-motion")
@click.argument("gen_manifest", type=click.Path(exists=True, dir_okay=False))
@click.argument("train_manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--ofs-threshold", type=float, default=None, help="Memorization threshold (default 0.5).")
@click.option("--k", type=int, default=None, help="Window length in flow fields (default 3).")
@click.option("--no-nmf", "no_nmf", is_flag=True, default=False, help="Disable natural-motion filtering.")
@click.option("--bins", type=int, default=None, help="Direction histogram bins (default 36).")
@click.option("--entropy-threshold", type=float, default=None, help="Panning entropy floor, nats (default 1.0).")
@click.option("--static-threshold", type=float, default=None, help="Static mean-magnitude floor, px (default 0.5).")
@click.option("--pixel-epsilon", type=float, default=None, help="Per-pixel norm epsilon (default 1e-8).")
@click.option("--workers", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def cmd_audit_motion(gen_manifest, train_manifest, ofs_threshold, k, no_nmf, bins,
                     entropy_threshold, static_threshold, pixel_epsilon, workers, config_path, out):
    """Audit generated optical flows against a training index."""
    defaults = {
        "ofs_threshold": 0.5,
        "k": 3,
        "nmf_enabled": True,
        "bins": 36,
        "entropy_threshold": 1.0,
        "static_magnitude_threshold": 0.5,
        "pixel_norm_epsilon": 1e-8,
    }
    file_cfg = _load_config_file(config_path, set(defaults) | {"workers"})
    flags = {
        "ofs_threshold": ofs_threshold,
        "k": k,
        "nmf_enabled": False if no_nmf else None,
        "bins": bins,
        "entropy_threshold": entropy_threshold,
        "static_magnitude_threshold": static_threshold,
        "pixel_norm_epsilon": pixel_epsilon,
    }
    cfg = _resolve(defaults, file_cfg, flags)
    n_workers = _resolve_workers(workers, file_cfg)
    if not (-1.0 <= cfg["ofs_threshold"] <= 1.0):
        raise ConfigError(f"ofs-threshold must be in [-1, 1], got {cfg['ofs_threshold']}")
    if cfg["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {cfg['k']}")

    gen = _load_flow_manifest(gen_manifest, "generated")
    train = _load_flow_manifest(train_manifest, "training")
    shortest = min(seq.n_flows for seq in gen + train)
    if cfg["k"] > shortest:
        raise ConfigError(
            f"k = {cfg['k']} exceeds the shortest flow count in the data ({shortest})"
        )

    auditor = MotionMemorizationAuditor(
        threshold=cfg["ofs_threshold"],
        k=cfg["k"],
        nmf_enabled=cfg["nmf_enabled"],
        bins=cfg["bins"],
        entropy_threshold=cfg["entropy_threshold"],
        static_magnitude_threshold=cfg["static_magnitude_threshold"],
        pixel_norm_epsilon=cfg["pixel_norm_epsilon"],
        workers=n_workers,
    ).fit(train)
    records = auditor.audit(gen)
    summary = summarize(records, AuditConfig(ofs_threshold=cfg["ofs_threshold"], k=cfg["k"],
                                             nmf_enabled=cfg["nmf_enabled"]))

    resolved = dict(cfg, workers=n_workers, gen_manifest=str(gen_manifest), train_manifest=str(train_manifest))
    _atomic_write_json(out, {
        "format_version": FORMAT_VERSION,
        "kind": "audit-motion",
        "config": resolved,
        "records": [
            {
                "gen_id": r.gen_id,
                "train_id": r.motion_train_id,
                "score": r.ofs_score,
                "gen_flow": r.ofs_gen_index,
                "train_flow": r.ofs_train_index,
                "memorized": r.motion_memorized,
            }
            for r in records
        ],
        "summary": summary.to_json_dict(),
    })
    click.echo(f"audited {len(records)} generated items -> {out}")


def _discover_trajectories(paths: tuple[str, ...]) -> list[Path]:
    dirs: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if not p.is_dir():
            raise DataError(f"{p}: not a directory")
        if any(p.glob("step_*_cond.vmt")):
            dirs.append(p)
            continue
        subs = sorted(d for d in p.iterdir() if d.is_dir() and any(d.glob("step_*_cond.vmt")))
        if not subs:
            raise DataError(f"{p}: no trajectories found")
        dirs.extend(subs)
    return dirs


@main.command("detect")
@click.argument("latent_dirs", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--strategy", type=click.Choice(["first", "first-n", "all"]), default=None,
              help="Step aggregation (default all).")
@click.option("--n", "first_n", type=int, default=None, help="Step count for first-n.")
@click.option("--content-threshold", type=float, default=None)
@click.option("--motion-threshold", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def cmd_detect(latent_dirs, strategy, first_n, content_threshold, motion_threshold, config_path, out):
    """Compute detection signals over latent trajectory directories."""
    defaults = {"strategy": STRATEGY_ALL, "n": 10, "content_threshold": None, "motion_threshold": None}
    file_cfg = _load_config_file(config_path, set(defaults))
    cfg = _resolve(defaults, file_cfg, {
        "strategy": strategy, "n": first_n,
        "content_threshold": content_threshold, "motion_threshold": motion_threshold,
    })
    if cfg["strategy"] not in STRATEGIES:
        raise ConfigError(f"unknown strategy {cfg['strategy']!r}")
    if cfg["strategy"] == STRATEGY_FIRST_N and (cfg["n"] is None or cfg["n"] < 1):
        raise ConfigError("strategy first-n requires --n >= 1")

    rows = []
    for traj_dir in _discover_trajectories(latent_dirs):
        started = time.perf_counter()
        traj = load_latent_trajectory(traj_dir)
        series = magnitude_series(traj)
        if cfg["strategy"] == STRATEGY_FIRST_N and cfg["n"] > len(series.per_step):
            raise ConfigError(
                f"n = {cfg['n']} exceeds the {len(series.per_step)} steps of {traj.trajectory_id}"
            )
        content_signal, motion_signal = aggregate(series, cfg["strategy"], cfg["n"])
        row = {
            "trajectory_id": traj.trajectory_id,
            "content_signal": content_signal,
            "motion_signal": motion_signal,
            "seconds": time.perf_counter() - started,
            "steps": series.to_json_dict()["steps"],
        }
        if cfg["content_threshold"] is not None:
            row["content_memorized"] = content_signal >= cfg["content_threshold"]
        if cfg["motion_threshold"] is not None:
            row["motion_memorized"] = motion_signal >= cfg["motion_threshold"]
        rows.append(row)

    _atomic_write_json(out, {
        "format_version": FORMAT_VERSION,
        "kind": "detect",
        "config": dict(cfg, latent_dirs=[str(p) for p in latent_dirs]),
        "trajectories": rows,
    })
    click.echo(f"detected over {len(rows)} trajectories -> {out}")


@main.command("dedup")
@click.argument("feature_manifest", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Single [N, D] feature tensor (requires --sidecar).")
@click.option("--sidecar", "sidecar_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="id,caption CSV aligned with --features rows.")
@click.option("--k", type=int, default=None, help="Neighbors per item (default 50).")
@click.option("--tau", type=float, default=None, help="Duplication threshold (default 0.95).")
@click.option("--limit", type=int, default=None, help="Prompt budget (default 500).")
@click.option("--block-rows", type=int, default=None)
@click.option("--block-cols", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Duplication report JSON.")
@click.option("--prompts-out", type=click.Path(dir_okay=False), default=None, help="Prompt dataset CSV.")
@_guard
def cmd_dedup(feature_manifest, features_path, sidecar_path, k, tau, limit,
              block_rows, block_cols, workers, config_path, out, prompts_out):
    """Duplication analysis over dataset features, plus prompt curation."""
    defaults = {"k": 50, "tau": 0.95, "limit": 500, "block_rows": 1024, "block_cols": 1024}
    file_cfg = _load_config_file(config_path, set(defaults) | {"workers"})
    cfg = _resolve(defaults, file_cfg, {
        "k": k, "tau": tau, "limit": limit, "block_rows": block_rows, "block_cols": block_cols,
    })
    n_workers = _resolve_workers(workers, file_cfg)

    if feature_manifest is None and features_path is None:
        raise ConfigError("provide a feature manifest or --features with --sidecar")
    if features_path is not None and sidecar_path is None:
        raise ConfigError("--features requires --sidecar")
    if feature_manifest is not None:
        index = load_feature_index(load_manifest(feature_manifest))
    else:
        index = load_feature_index_from_matrix(features_path, sidecar_path)

    if cfg["k"] >= len(index.ids):
        raise ConfigError(f"k = {cfg['k']} must be smaller than the item count {len(index.ids)}")
    if not (0.0 < cfg["tau"] <= 1.0):
        raise ConfigError(f"tau must be in (0, 1], got {cfg['tau']}")
    if cfg["limit"] < 1:
        raise ConfigError(f"limit must be >= 1, got {cfg['limit']}")
    if cfg["block_rows"] < 1 or cfg["block_cols"] < 1:
        raise ConfigError("block sizes must be positive")

    neighbors = topk_neighbors(index, cfg["k"], cfg["block_rows"], cfg["block_cols"], n_workers)
    report = duplication_counts(neighbors, cfg["tau"])
    resolved = dict(cfg, workers=n_workers)
    _atomic_write_json(out, {
        "format_version": FORMAT_VERSION,
        "kind": "dedup",
        "config": resolved,
        "items": [
            {
                "id": item.id,
                "duplication_count": item.duplication_count,
                "neighbors": [{"id": nid, "similarity": s} for nid, s in item.neighbors],
            }
            for item in report.items
        ],
    })
    message = f"analyzed {len(report.items)} items -> {out}"
    if prompts_out is not None:
        prompts = curate_prompts(index, report, cfg["limit"])
        write_prompt_csv(prompts, prompts_out)
        message += f"; {len(prompts.entries)} prompts -> {prompts_out}"
        if prompts.shortfall:
            message += f" ({prompts.shortfall} short of the requested {cfg['limit']})"
    click.echo(message)


@main.command("evaluate")
@click.argument("scores_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=0.5, show_default=True,
              help="Threshold for the fixed-threshold F1.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def cmd_evaluate(scores_csv, threshold, out):
    """AUC and F1 for an id,score,label CSV."""
    items = load_scored_csv(scores_csv)
    if not items:
        raise DataError(f"{scores_csv}: no rows")
    best_thr, best_score = best_f1(items)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "evaluate",
        "config": {"scores_csv": str(scores_csv), "threshold": threshold},
        "n": len(items),
        "positives": sum(1 for it in items if it.label == 1),
        "negatives": sum(1 for it in items if it.label == 0),
        "auc": auc(items),
        "f1_at_threshold": f1_at(items, threshold),
        "best_f1": {"threshold": best_thr, "f1": best_score},
    }
    _atomic_write_json(out, payload)
    click.echo(f"evaluated {len(items)} items -> {out}")


@main.command("synth")
@click.option("--kind", type=click.Choice(["content", "motion", "latent"]), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-train", type=int, default=100, show_default=True)
@click.option("--n-generated", type=int, default=100, show_default=True)
@click.option("--planted", type=int, default=20, show_default=True)
@click.option("--noise-sigma", type=float, default=0.01, show_default=True)
@click.option("--frames", type=int, default=8, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--height", type=int, default=16, show_default=True)
@click.option("--width", type=int, default=16, show_default=True)
@click.option("--steps", type=int, default=20, show_default=True)
@_guard
def cmd_synth(kind, out_dir, seed, n_train, n_generated, planted, noise_sigma,
              frames, dim, height, width, steps):
    """Generate a deterministic fixture with planted memorization."""
    try:
        spec = FixtureSpec(
            seed=seed, n_train=n_train, n_generated=n_generated, planted_pairs=planted,
            noise_sigma=noise_sigma, frames=frames, dim=dim, height=height, width=width,
            steps=steps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if kind == "content":
        paths = generate_content_fixture(spec, out_dir)
        click.echo(f"content fixture -> {paths.root} (labels: {paths.labels})")
    elif kind == "motion":
        try:
            paths = generate_motion_fixture(spec, out_dir)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        click.echo(f"motion fixture -> {paths.root} (labels: {paths.labels})")
    else:
        paths = generate_latent_fixture(spec, out_dir)
        click.echo(f"latent fixture -> {paths.root} ({len(paths.trajectory_dirs)} trajectories)")


if __name__ == "__main__":
    main()
