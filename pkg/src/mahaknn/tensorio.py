"""Binary interchange formats for embedding sets and fitted models.

Two little-endian formats, both fully specified here so any language can
produce or consume them without an ecosystem dependency:

EMB1 (embedding sets)
    magic  "EMB1" (4 ASCII bytes)
    u32    version (= 1)
    u32    flags (bit0: logits present, bit1: labels present; others 0)
    u64    n
    u32    k_layers
    u32    dim
    u32    num_classes (>= 2 when logits flagged, else 0)
    f32[n * k_layers * dim]   embeddings, index ((i * k_layers) + k) * dim + j
    f32[n * num_classes]      logits, if flagged
    i32[n]                    labels, if flagged (-1 marks out-of-distribution)

MDL1 (fitted models; statistics stored as f64 to preserve fit precision)
    magic  "MDL1" (4 ASCII bytes)
    u32    version (= 1)
    u32    k_layers
    u32    dim
    f64    ridge0 (fit configuration value)
    u8     tanh_flag
    per layer k: f64[dim] mean, f64[dim * dim] lower Cholesky factor
                 (row-major, zeros above the diagonal), f64 layer scale w
    u32    knn_k
    f64    contamination
    f64    delta
    u64    n_train
    f64[n_train * k_layers]   stored training feature rows

Readers validate header arithmetic against the actual byte count before
touching the payload, so a corrupt header can never trigger a huge
allocation. Every reader failure is a typed error from .errors; a reader
never returns a value that violates the invariants below.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import KnnModel
from .errors import (
    BadMagic,
    DimensionMismatch,
    InvalidHeader,
    InvalidLabel,
    IoFailure,
    NonFiniteValue,
    TruncatedPayload,
    UnsupportedVersion,
    VersionMismatch,
)
from .featurizer import LayerStatsModel
from .linalg import GaussianFit

_EMB_MAGIC = b"EMB1"
_EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sIIQIII")
_FLAG_LOGITS = 0x1
_FLAG_LABELS = 0x2

_MDL_MAGIC = b"MDL1"
_MDL_VERSION = 1
_MDL_HEADER = struct.Struct("<4sIIIdB")
_MDL_TAIL = struct.Struct("<IddQ")


@dataclass(frozen=True)
class EmbeddingSet:
    """Pooled per-layer embeddings for n utterances, plus optional logits
    and labels.

    Attributes:
        embeddings: float32 array of shape (n, k_layers, dim).
        logits: optional float32 array of shape (n, num_classes).
        labels: optional int32 array of shape (n,); -1 marks an utterance
            whose true class was never seen in training.
    """

    embeddings: np.ndarray
    logits: np.ndarray | None = None
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def k_layers(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[2])

    @property
    def num_classes(self) -> int:
        return 0 if self.logits is None else int(self.logits.shape[1])

    @classmethod
    def create(
        cls,
        embeddings: np.ndarray,
        logits: np.ndarray | None = None,
        labels: np.ndarray | None = None,
    ) -> "EmbeddingSet":
        """Build a validated set, casting inputs to the storage dtypes."""
        emb = np.ascontiguousarray(embeddings, dtype=np.float32)
        lg = None if logits is None else np.ascontiguousarray(logits, dtype=np.float32)
        lb = None if labels is None else np.ascontiguousarray(labels, dtype=np.int32)
        out = cls(embeddings=emb, logits=lg, labels=lb)
        out.validate()
        return out

    def validate(self) -> None:
        """Check every format invariant; raises a typed error on violation."""
        if self.embeddings.ndim != 3:
            raise InvalidHeader(
                f"embeddings must be (n, k_layers, dim), got shape {self.embeddings.shape}"
            )
        n, k, d = self.embeddings.shape
        if n < 1 or k < 1 or d < 1:
            raise InvalidHeader(f"all of n, k_layers, dim must be >= 1, got {(n, k, d)}")
        if not np.isfinite(self.embeddings).all():
            raise NonFiniteValue("embeddings contain NaN or infinity")
        if self.logits is not None:
            if self.logits.ndim != 2 or self.logits.shape[0] != n:
                raise DimensionMismatch(
                    f"logits must be (n, num_classes) with n={n}, got {self.logits.shape}"
                )
            if self.logits.shape[1] < 2:
                raise InvalidHeader("logits require num_classes >= 2")
            if not np.isfinite(self.logits).all():
                raise NonFiniteValue("logits contain NaN or infinity")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise DimensionMismatch(
                    f"labels must be shape ({n},), got {self.labels.shape}"
                )
            if self.logits is not None:
                bad = (self.labels < -1) | (self.labels >= self.num_classes)
            else:
                bad = self.labels < -1
            if bad.any():
                i = int(np.argmax(bad))
                raise InvalidLabel(
                    f"label {int(self.labels[i])} at row {i} is outside the allowed range"
                )

    def equals(self, other: "EmbeddingSet") -> bool:
        """Bit-exact equality of all payloads."""
        if self.embeddings.tobytes() != other.embeddings.tobytes():
            return False
        if (self.logits is None) != (other.logits is None):
            return False
        if self.logits is not None and self.logits.tobytes() != other.logits.tobytes():
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and self.labels.tobytes() != other.labels.tobytes():
            return False
        return True


def read_embeddings(path: str | Path) -> EmbeddingSet:
    """Read and fully validate an EMB1 file.

    Raises:
        IoFailure, BadMagic, UnsupportedVersion, InvalidHeader,
        TruncatedPayload, NonFiniteValue, InvalidLabel.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) >= 4 and raw[:4] != _EMB_MAGIC:
        raise BadMagic(f"{path}: not an EMB1 file")
    if len(raw) < _EMB_HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the EMB1 header")
    _, version, flags, n, k_layers, dim, num_classes = _EMB_HEADER.unpack_from(raw)
    if version != _EMB_VERSION:
        raise UnsupportedVersion(f"{path}: EMB1 version {version} not supported")
    if flags & ~(_FLAG_LOGITS | _FLAG_LABELS):
        raise InvalidHeader(f"{path}: unknown flag bits 0x{flags:x}")
    has_logits = bool(flags & _FLAG_LOGITS)
    has_labels = bool(flags & _FLAG_LABELS)
    if n < 1 or k_layers < 1 or dim < 1:
        raise InvalidHeader(f"{path}: n, k_layers, dim must all be >= 1")
    if has_logits and num_classes < 2:
        raise InvalidHeader(f"{path}: logits flagged but num_classes={num_classes}")
    if not has_logits and num_classes != 0:
        raise InvalidHeader(f"{path}: num_classes={num_classes} without logits")

    # Size arithmetic in Python ints: a mutated header cannot overflow or
    # trigger an allocation before this check.
    expected = _EMB_HEADER.size + 4 * n * k_layers * dim
    if has_logits:
        expected += 4 * n * num_classes
    if has_labels:
        expected += 4 * n
    if len(raw) != expected:
        raise TruncatedPayload(
            f"{path}: header implies {expected} bytes, file has {len(raw)}"
        )

    offset = _EMB_HEADER.size
    count = n * k_layers * dim
    embeddings = (
        np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        .reshape(n, k_layers, dim)
        .copy()
    )
    offset += 4 * count
    logits = None
    if has_logits:
        logits = (
            np.frombuffer(raw, dtype="<f4", count=n * num_classes, offset=offset)
            .reshape(n, num_classes)
            .copy()
        )
        offset += 4 * n * num_classes
    labels = None
    if has_labels:
        labels = np.frombuffer(raw, dtype="<i4", count=n, offset=offset).copy()

    out = EmbeddingSet(embeddings=embeddings, logits=logits, labels=labels)
    out.validate()
    return out


def write_embeddings(dataset: EmbeddingSet, path: str | Path) -> None:
    """Write an EMB1 file; the set is validated before any bytes go out.

    read_embeddings(write_embeddings(s)) reproduces s bit-exactly.
    """
    dataset.validate()
    flags = 0
    if dataset.logits is not None:
        flags |= _FLAG_LOGITS
    if dataset.labels is not None:
        flags |= _FLAG_LABELS
    parts = [
        _EMB_HEADER.pack(
            _EMB_MAGIC,
            _EMB_VERSION,
            flags,
            dataset.n,
            dataset.k_layers,
            dataset.dim,
            dataset.num_classes,
        ),
        np.ascontiguousarray(dataset.embeddings, dtype="<f4").tobytes(),
    ]
    if dataset.logits is not None:
        parts.append(np.ascontiguousarray(dataset.logits, dtype="<f4").tobytes())
    if dataset.labels is not None:
        parts.append(np.ascontiguousarray(dataset.labels, dtype="<i4").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class FitMeta:
    """Fit configuration captured alongside the statistics."""

    k_neighbors: int
    contamination: float
    ridge0: float
    tanh: bool
    version: int = _MDL_VERSION


@dataclass(frozen=True)
class ModelArtifact:
    """A fitted model: per-layer statistics plus the KNN rejection model."""

    layer_stats: LayerStatsModel
    knn: KnnModel
    meta: FitMeta

    def equals(self, other: "ModelArtifact") -> bool:
        """Bit-exact equality of every persisted statistic."""
        a, b = self.layer_stats, other.layer_stats
        if (a.k_layers, a.dim, a.tanh_enabled) != (b.k_layers, b.dim, b.tanh_enabled):
            return False
        if a.w.tobytes() != b.w.tobytes():
            return False
        for fa, fb in zip(a.per_layer, b.per_layer):
            if fa.mean.tobytes() != fb.mean.tobytes():
                return False
            if fa.chol_lower.tobytes() != fb.chol_lower.tobytes():
                return False
        ka, kb = self.knn, other.knn
        if (ka.k_neighbors, ka.contamination, ka.delta) != (
            kb.k_neighbors,
            kb.contamination,
            kb.delta,
        ):
            return False
        if ka.train_features.tobytes() != kb.train_features.tobytes():
            return False
        return (self.meta.ridge0, self.meta.tanh, self.meta.version) == (
            other.meta.ridge0,
            other.meta.tanh,
            other.meta.version,
        )


def save_model(artifact: ModelArtifact, path: str | Path) -> None:
    """Write a fitted model as MDL1."""
    stats = artifact.layer_stats
    knn = artifact.knn
    k_layers, dim = stats.k_layers, stats.dim
    parts = [
        _MDL_HEADER.pack(
            _MDL_MAGIC,
            _MDL_VERSION,
            k_layers,
            dim,
            artifact.meta.ridge0,
            1 if stats.tanh_enabled else 0,
        )
    ]
    for k in range(k_layers):
        fit = stats.per_layer[k]
        parts.append(np.ascontiguousarray(fit.mean, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(fit.chol_lower, dtype="<f8").tobytes())
        parts.append(struct.pack("<d", float(stats.w[k])))
    parts.append(
        _MDL_TAIL.pack(
            knn.k_neighbors,
            knn.contamination,
            knn.delta,
            knn.train_features.shape[0],
        )
    )
    parts.append(np.ascontiguousarray(knn.train_features, dtype="<f8").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path: str | Path) -> ModelArtifact:
    """Read an MDL1 file back into a ModelArtifact.

    Raises:
        IoFailure, BadMagic, VersionMismatch, InvalidHeader,
        TruncatedPayload, NonFiniteValue.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) >= 4 and raw[:4] != _MDL_MAGIC:
        raise BadMagic(f"{path}: not an MDL1 file")
    if len(raw) < _MDL_HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the MDL1 header")
    _, version, k_layers, dim, ridge0, tanh_flag = _MDL_HEADER.unpack_from(raw)
    if version != _MDL_VERSION:
        raise VersionMismatch(f"{path}: MDL1 version {version} not supported")
    if k_layers < 1 or dim < 1:
        raise InvalidHeader(f"{path}: k_layers and dim must be >= 1")
    if tanh_flag not in (0, 1):
        raise InvalidHeader(f"{path}: tanh flag must be 0 or 1, got {tanh_flag}")

    per_layer_bytes = 8 * (dim + dim * dim + 1)
    tail_offset = _MDL_HEADER.size + k_layers * per_layer_bytes
    if len(raw) < tail_offset + _MDL_TAIL.size:
        raise TruncatedPayload(f"{path}: layer statistics truncated")
    knn_k, contamination, delta, n_train = _MDL_TAIL.unpack_from(raw, tail_offset)
    expected = tail_offset + _MDL_TAIL.size + 8 * n_train * k_layers
    if len(raw) != expected:
        raise TruncatedPayload(
            f"{path}: header implies {expected} bytes, file has {len(raw)}"
        )
    if n_train < 1 or not (1 <= knn_k <= n_train):
        raise InvalidHeader(
            f"{path}: need 1 <= knn_k <= n_train, got knn_k={knn_k}, n_train={n_train}"
        )
    if not (0.0 < contamination < 0.5):
        raise InvalidHeader(f"{path}: contamination {contamination} outside (0, 0.5)")

    offset = _MDL_HEADER.size
    fits: list[GaussianFit] = []
    w = np.empty(k_layers, dtype=np.float64)
    for k in range(k_layers):
        mean = np.frombuffer(raw, dtype="<f8", count=dim, offset=offset).copy()
        offset += 8 * dim
        chol = (
            np.frombuffer(raw, dtype="<f8", count=dim * dim, offset=offset)
            .reshape(dim, dim)
            .copy()
        )
        offset += 8 * dim * dim
        (w_k,) = struct.unpack_from("<d", raw, offset)
        offset += 8
        if not (np.isfinite(mean).all() and np.isfinite(chol).all() and np.isfinite(w_k)):
            raise NonFiniteValue(f"{path}: layer {k} statistics contain NaN/inf")
        if w_k <= 0:
            raise InvalidHeader(f"{path}: layer {k} scale w={w_k} must be positive")
        if not (np.diag(chol) > 0).all():
            raise InvalidHeader(f"{path}: layer {k} factor diagonal not positive")
        w[k] = w_k
        # applied_ridge is a fit-time diagnostic; the format does not carry it.
        fits.append(GaussianFit(mean=mean, chol_lower=chol, applied_ridge=0.0))

    features = (
        np.frombuffer(raw, dtype="<f8", count=n_train * k_layers, offset=tail_offset + _MDL_TAIL.size)
        .reshape(n_train, k_layers)
        .copy()
    )
    if not np.isfinite(features).all():
        raise NonFiniteValue(f"{path}: stored training features contain NaN/inf")
    if not np.isfinite(delta):
        raise NonFiniteValue(f"{path}: threshold is not finite")

    stats = LayerStatsModel(
        per_layer=tuple(fits),
        w=w,
        tanh_enabled=bool(tanh_flag),
        dim=dim,
        k_layers=k_layers,
    )
    knn = KnnModel(
        train_features=features,
        k_neighbors=int(knn_k),
        contamination=float(contamination),
        delta=float(delta),
    )
    meta = FitMeta(
        k_neighbors=int(knn_k),
        contamination=float(contamination),
        ridge0=float(ridge0),
        tanh=bool(tanh_flag),
        version=int(version),
    )
    return ModelArtifact(layer_stats=stats, knn=knn, meta=meta)


def write_manifest(classes: list[str], path: str | Path) -> None:
    """Write the informational JSON sidecar mapping label ids to names."""
    Path(path).write_text(json.dumps({"classes": list(classes)}, indent=2) + "\n")


def read_manifest(path: str | Path) -> list[str]:
    """Read the JSON sidecar; purely informational, never required."""
    data = json.loads(Path(path).read_text())
    return [str(c) for c in data["classes"]]
