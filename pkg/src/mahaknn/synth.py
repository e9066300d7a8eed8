"""Deterministic synthetic embedding sets for desk-scale pipeline testing.

Per class and per layer, embeddings are drawn from a Gaussian cluster whose
mean is a pseudo-random vector of norm class_sep and whose covariance is a
random SPD matrix normalized to unit trace (so the cluster RMS radius is 1
and class_sep / ood_shift are expressed in that unit). Out-of-distribution
rows are fresh draws from the same class mixture, shifted by ood_shift
along a per-layer held-out direction orthogonal to the class means; with
ood_shift = 0 they are indistinguishable from a fresh in-distribution
mixture draw. Logits are a scaled one-hot of the true class plus noise for
in-distribution rows, and pure noise for OOD rows.

PRNG contract (frozen): numpy Generator over PCG64 seeded with
SynthConfig.seed, consumed single-threaded in this exact order:
  1. per layer k = 0..K-1: per class c = 0..M-1 a raw mean (d draws) and a
     raw covariance factor (d*d draws), then the raw held-out direction
     (d draws);
  2. train class permutation; 3. train latents (n_train, K, d);
  4. train logit noise (n_train, M); 5. test-ID class permutation;
  6. test-ID latents; 7. test-ID logit noise; 8. OOD class assignment;
  9. OOD latents; 10. OOD logit noise.
Identical configs therefore produce bit-identical files on a given
platform; cross-platform agreement is statistical, not bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import BadConfig
from .tensorio import EmbeddingSet

_LOGIT_SCALE = 10.0


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings. Field names are the JSON config contract."""

    seed: int = 0
    n_train: int = 1000
    n_test_id: int = 500
    n_test_ood: int = 500
    M: int = 4
    K: int = 4
    d: int = 16
    class_sep: float = 3.0
    ood_shift: float = 4.0
    logit_noise: float = 0.5
    # Layers that receive the OOD shift; None means every layer.
    ood_layers: tuple[int, ...] | None = None

    def validate(self) -> None:
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise BadConfig(f"seed must fit in u64, got {self.seed}")
        if self.n_train < 1 or self.n_test_id < 1:
            raise BadConfig("n_train and n_test_id must be >= 1")
        if self.n_test_ood < 0:
            raise BadConfig("n_test_ood must be >= 0")
        if self.M < 2:
            raise BadConfig(f"M must be >= 2 (logits need two classes), got {self.M}")
        if self.K < 1 or self.d < 1:
            raise BadConfig("K and d must be >= 1")
        if self.class_sep < 0 or self.ood_shift < 0:
            raise BadConfig("class_sep and ood_shift must be >= 0")
        if self.logit_noise < 0:
            raise BadConfig("logit_noise must be >= 0")
        if self.ood_layers is not None:
            if len(self.ood_layers) == 0:
                raise BadConfig("ood_layers must be None or non-empty")
            for k in self.ood_layers:
                if not 0 <= k < self.K:
                    raise BadConfig(f"ood_layers entry {k} outside [0, {self.K})")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise BadConfig(f"unknown config keys: {sorted(unknown)}")
        if "ood_layers" in data and data["ood_layers"] is not None:
            data = dict(data)
            data["ood_layers"] = tuple(int(k) for k in data["ood_layers"])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise BadConfig(f"config {path} must be a JSON object")
        return cls.from_dict(data)


def _cluster_params(rng: np.random.Generator, cfg: SynthConfig):
    """Frozen step 1: per-layer class means, covariance factors, directions."""
    means = np.empty((cfg.K, cfg.M, cfg.d))
    chols = np.empty((cfg.K, cfg.M, cfg.d, cfg.d))
    dirs = np.empty((cfg.K, cfg.d))
    eye = np.eye(cfg.d)
    for k in range(cfg.K):
        for c in range(cfg.M):
            raw = rng.standard_normal(cfg.d)
            norm = np.linalg.norm(raw)
            means[k, c] = cfg.class_sep * raw / norm if norm > 0 else 0.0
            A = rng.standard_normal((cfg.d, cfg.d))
            W = A @ A.T
            W /= np.trace(W)
            # Half random Wishart direction, half isotropic: unit trace with
            # bounded condition number.
            cov = 0.5 * W + (0.5 / cfg.d) * eye
            chols[k, c] = np.linalg.cholesky(cov)
        g = rng.standard_normal(cfg.d)
        span = means[k][np.linalg.norm(means[k], axis=1) > 1e-12]
        if span.shape[0] > 0:
            q, _ = np.linalg.qr(span.T)
            g = g - q @ (q.T @ g)
        norm = np.linalg.norm(g)
        dirs[k] = g / norm if norm > 1e-12 else eye[0]
    return means, chols, dirs


def _draw_rows(
    rng: np.random.Generator,
    cfg: SynthConfig,
    classes: np.ndarray,
    means: np.ndarray,
    chols: np.ndarray,
) -> np.ndarray:
    latents = rng.standard_normal((classes.shape[0], cfg.K, cfg.d))
    emb = np.empty_like(latents)
    for k in range(cfg.K):
        for c in range(cfg.M):
            idx = np.nonzero(classes == c)[0]
            if idx.size:
                emb[idx, k, :] = means[k, c] + latents[idx, k, :] @ chols[k, c].T
    return emb


def _id_logits(rng: np.random.Generator, cfg: SynthConfig, classes: np.ndarray) -> np.ndarray:
    noise = rng.standard_normal((classes.shape[0], cfg.M))
    logits = cfg.logit_noise * noise
    logits[np.arange(classes.shape[0]), classes] += _LOGIT_SCALE
    return logits


def _balanced_classes(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return (np.arange(n) % m)[rng.permutation(n)]


def generate(config: SynthConfig) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Produce (train, test) sets; same config, same bits.

    Train carries labels 0..M-1 and logits; test is the in-distribution
    block (labeled by class) followed by the OOD block (labeled -1).

    Raises:
        BadConfig: Any configuration invariant is violated.
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    means, chols, dirs = _cluster_params(rng, config)

    train_classes = _balanced_classes(rng, config.n_train, config.M)
    train_emb = _draw_rows(rng, config, train_classes, means, chols)
    train_logits = _id_logits(rng, config, train_classes)
    train = EmbeddingSet.create(train_emb, train_logits, train_classes)

    id_classes = _balanced_classes(rng, config.n_test_id, config.M)
    id_emb = _draw_rows(rng, config, id_classes, means, chols)
    id_logits = _id_logits(rng, config, id_classes)

    if config.n_test_ood > 0:
        ood_classes = rng.integers(0, config.M, config.n_test_ood)
        ood_emb = _draw_rows(rng, config, ood_classes, means, chols)
        shifted = (
            range(config.K) if config.ood_layers is None else config.ood_layers
        )
        for k in shifted:
            ood_emb[:, k, :] += config.ood_shift * dirs[k]
        ood_logits = config.logit_noise * rng.standard_normal(
            (config.n_test_ood, config.M)
        )
        test_emb = np.concatenate([id_emb, ood_emb], axis=0)
        test_logits = np.concatenate([id_logits, ood_logits], axis=0)
        test_labels = np.concatenate(
            [id_classes, -np.ones(config.n_test_ood, dtype=np.int64)]
        )
    else:
        test_emb, test_logits, test_labels = id_emb, id_logits, id_classes

    test = EmbeddingSet.create(test_emb, test_logits, test_labels)
    return train, test
