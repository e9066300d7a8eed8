"""Extraction manifests: CSV rows of (audio path, label id or -1)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

TARGET_SAMPLE_RATE = 16_000


@dataclass(frozen=True)
class ExtractionManifest:
    """What to extract: audio rows, the checkpoint, and the output path."""

    rows: tuple[tuple[Path, int], ...]
    checkpoint: str
    out_path: Path
    sample_rate: int = TARGET_SAMPLE_RATE
    classes: tuple[str, ...] = field(default_factory=tuple)


def read_manifest_rows(path: str | Path) -> tuple[tuple[Path, int], ...]:
    """Parse `path,label` rows; relative audio paths resolve against the
    manifest's directory. A leading `path,label` header row is optional."""
    manifest_path = Path(path)
    try:
        text = manifest_path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    rows: list[tuple[Path, int]] = []
    reader = csv.reader(text.splitlines())
    for lineno, row in enumerate(reader, start=1):
        if not row or (lineno == 1 and [c.strip() for c in row] == ["path", "label"]):
            continue
        if len(row) != 2:
            raise ManifestError(f"{path}:{lineno}: expected `path,label`, got {row!r}")
        raw_path, raw_label = row[0].strip(), row[1].strip()
        try:
            label = int(raw_label)
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: label {raw_label!r} is not an integer") from exc
        if label < -1:
            raise ManifestError(f"{path}:{lineno}: label must be -1 or a class id")
        audio = Path(raw_path)
        if not audio.is_absolute():
            audio = manifest_path.parent / audio
        rows.append((audio, label))
    if not rows:
        raise ManifestError(f"{path}: manifest has no rows")
    return tuple(rows)
