"""vidmem-extract command line: emit vidmem interchange files from media or prompts."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .embeddings import extract_embeddings
from .features import extract_dataset_features
from .flows import extract_flows
from .jobs import ExtractorError, ExtractorJob, ModelUnavailableError
from .latents import extract_latents
from .stub import stub_embeddings, stub_features, stub_flows, stub_latents


def _job(inputs, out, model, weights, device, frame_cap, seed, force, **extra):
    return ExtractorJob(
        inputs=tuple(Path(p) for p in inputs),
        out_dir=Path(out),
        model=model,
        weights=Path(weights) if weights else None,
        device=device,
        frame_cap=frame_cap,
        seed=seed,
        force=force,
        extra=extra,
    )


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            manifest = fn(*args, **kwargs)
        except ModelUnavailableError as exc:
            click.echo(f"vidmem-extract: model unavailable: {exc}", err=True)
            sys.exit(4)
        except ExtractorError as exc:
            click.echo(f"vidmem-extract: error: {exc}", err=True)
            sys.exit(3)
        click.echo(f"wrote {manifest}")

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


_COMMON = [
    click.option("--in", "inputs", multiple=True, required=True,
                 type=click.Path(exists=True), help="Media path(s) or a prompt list."),
    click.option("--out", required=True, type=click.Path(file_okay=False)),
    click.option("--weights", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--device", default="cpu", show_default=True),
    click.option("--frame-cap", type=int, default=32, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--force", is_flag=True, default=False),
]


def _with_common(fn):
    for option in reversed(_COMMON):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """Feature extractors emitting vidmem tensor/manifest files."""


@main.command("embeddings")
@_with_common
@click.option("--model", default="torchscript", show_default=True)
@click.option("--size", type=int, default=224, show_default=True)
@_guard
def cmd_embeddings(inputs, out, weights, device, frame_cap, seed, force, model, size):
    """Per-frame copy-detection embeddings -> [N, D] tensors."""
    if model == "stub":
        return stub_embeddings(_job(inputs, out, model, weights, device, frame_cap, seed, force))
    return extract_embeddings(_job(inputs, out, model, weights, device, frame_cap, seed, force, size=size))


@main.command("flows")
@_with_common
@click.option("--model", default="raft", show_default=True,
              help="'raft' (torchvision) or 'torchscript' with --weights.")
@_guard
def cmd_flows(inputs, out, weights, device, frame_cap, seed, force, model):
    """Consecutive-frame optical flow -> [M, 2, H, W] tensors."""
    if model == "stub":
        return stub_flows(_job(inputs, out, model, weights, device, frame_cap, seed, force))
    return extract_flows(_job(inputs, out, model, weights, device, frame_cap, seed, force))


@main.command("features")
@_with_common
@click.option("--model", default="torchscript", show_default=True)
@click.option("--size", type=int, default=224, show_default=True)
@_guard
def cmd_features(inputs, out, weights, device, frame_cap, seed, force, model, size):
    """Whole-video features for duplication analysis -> [D] tensors."""
    if model == "stub":
        return stub_features(_job(inputs, out, model, weights, device, frame_cap, seed, force))
    return extract_dataset_features(_job(inputs, out, model, weights, device, frame_cap, seed, force, size=size))


@main.command("latents")
@_with_common
@click.option("--model", default="", help="diffusers model id for the sampling pipeline.")
@click.option("--steps", type=int, default=50, show_default=True)
@_guard
def cmd_latents(inputs, out, weights, device, frame_cap, seed, force, model, steps):
    """Per-step conditional/unconditional noise predictions from a prompt list."""
    if model == "stub":
        return stub_latents(_job(inputs, out, model, weights, device, frame_cap, seed, force), steps)
    return extract_latents(_job(inputs, out, model, weights, device, frame_cap, seed, force), steps)


@main.command("stub")
@click.option("--kind", type=click.Choice(["embeddings", "flows", "latents", "features"]), required=True)
@click.option("--in", "inputs", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=50, show_default=True, help="Latent step count.")
@click.option("--force", is_flag=True, default=False)
@_guard
def cmd_stub(kind, inputs, out, seed, steps, force):
    """Deterministic fake extractor for contract tests; no models needed."""
    job = _job(inputs, out, "stub", None, "cpu", 32, seed, force)
    if kind == "embeddings":
        return stub_embeddings(job)
    if kind == "flows":
        return stub_flows(job)
    if kind == "features":
        return stub_features(job)
    return stub_latents(job, steps)


if __name__ == "__main__":
    main()
