"""Pooled per-layer embedding extraction into EMB1 files."""

from .extract import ExtractionSummary, extract
from .manifest import ExtractionManifest, read_manifest_rows

__version__ = "0.1.0"

__all__ = ["ExtractionManifest", "ExtractionSummary", "extract", "read_manifest_rows"]
