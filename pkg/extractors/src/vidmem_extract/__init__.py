"""Extraction adapters emitting vidmem interchange files.

The package depends on the audit engine only through its file formats
(VMT tensors, JSON Lines manifests) and command line; heavyweight model
runtimes (torch, opencv, diffusers) are imported lazily so the stub
extractor works anywhere.
"""

from .jobs import ExtractorError, ExtractorJob, ModelUnavailableError
from .stub import stub_embeddings, stub_features, stub_flows, stub_latents
from .vmtio import write_manifest, write_vmt

__version__ = "0.1.0"

__all__ = [
    "ExtractorError",
    "ExtractorJob",
    "ModelUnavailableError",
    "stub_embeddings",
    "stub_features",
    "stub_flows",
    "stub_latents",
    "write_manifest",
    "write_vmt",
]
