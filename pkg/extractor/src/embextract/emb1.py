"""Minimal EMB1 encoder.

Writes the little-endian EMB1 interchange format consumed by the core
pipeline: magic "EMB1", u32 version=1, u32 flags (bit0 logits, bit1
labels), u64 n, u32 k_layers, u32 dim, u32 num_classes, then f32
embeddings in ((i * k_layers) + k) * dim + j order, f32 logits and i32
labels when flagged. Implemented here from the format definition so this
package stays decoupled from the pipeline's internals.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"EMB1"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQIII")
_FLAG_LOGITS = 0x1
_FLAG_LABELS = 0x2


def write_emb1(
    path: str | Path,
    embeddings: np.ndarray,
    logits: np.ndarray | None = None,
    labels: np.ndarray | None = None,
) -> None:
    """Write one EMB1 file; validates shapes and finiteness first."""
    emb = np.ascontiguousarray(embeddings, dtype="<f4")
    if emb.ndim != 3:
        raise ValueError(f"embeddings must be (n, k_layers, dim), got {emb.shape}")
    n, k_layers, dim = emb.shape
    if min(n, k_layers, dim) < 1:
        raise ValueError(f"n, k_layers, dim must all be >= 1, got {emb.shape}")
    if not np.isfinite(emb).all():
        raise ValueError("embeddings contain NaN or infinity")

    flags = 0
    num_classes = 0
    parts = []
    if logits is not None:
        lg = np.ascontiguousarray(logits, dtype="<f4")
        if lg.shape[0] != n or lg.ndim != 2 or lg.shape[1] < 2:
            raise ValueError(f"logits must be (n, >=2), got {lg.shape}")
        if not np.isfinite(lg).all():
            raise ValueError("logits contain NaN or infinity")
        flags |= _FLAG_LOGITS
        num_classes = lg.shape[1]
        parts.append(lg.tobytes())
    if labels is not None:
        lb = np.ascontiguousarray(labels, dtype="<i4")
        if lb.shape != (n,):
            raise ValueError(f"labels must be shape ({n},), got {lb.shape}")
        if logits is not None and ((lb < -1) | (lb >= num_classes)).any():
            raise ValueError("labels must be -1 or in [0, num_classes)")
        if logits is None and (lb < -1).any():
            raise ValueError("labels must be >= -1")
        flags |= _FLAG_LABELS
        parts.append(lb.tobytes())

    header = _HEADER.pack(_MAGIC, _VERSION, flags, n, k_layers, dim, num_classes)
    Path(path).write_bytes(header + emb.tobytes() + b"".join(parts))
