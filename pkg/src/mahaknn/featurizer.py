"""Per-layer Gaussian statistics and Mahalanobis feature extraction.

For each transformer layer the training embeddings are (optionally) squashed
through tanh, then summarized by a mean and a factorized covariance. An
utterance becomes a K-vector of per-layer squared Mahalanobis distances,
which downstream modules feed to the KNN rejection scorer. Features are
kept in squared form; no square root is taken.

Layer scales: with calibration enabled, each layer's covariance is rescaled
so that the mean feature value over the fitting set is exactly 1. This
balances layer magnitudes before they are concatenated, so no single layer
dominates the Euclidean geometry of the downstream detector. The scale w_k
is folded into the stored Cholesky factor (factor / sqrt(w_k)), making the
stored quadratic form equal w_k times the raw one; w_k itself is kept for
introspection and serialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatch, InsufficientSamples, OodInTrainingSet
from .linalg import (
    DEFAULT_RIDGE0,
    GaussianFit,
    cholesky_spd,
    maha_sq_batch,
    sample_cov,
    sample_mean,
)

if TYPE_CHECKING:
    from .tensorio import EmbeddingSet


@dataclass(frozen=True)
class LayerStatsModel:
    """Fitted per-layer statistics.

    Attributes:
        per_layer: One GaussianFit per layer; the stored factor already
            carries the layer scale.
        w: Positive per-layer scales, shape (k_layers,).
        tanh_enabled: Whether embeddings are squashed before scoring. The
            same flag drives fitting and inference, so there is no
            train/serve skew.
    """

    per_layer: tuple[GaussianFit, ...]
    w: np.ndarray
    tanh_enabled: bool
    dim: int
    k_layers: int


def tanh_transform(e: np.ndarray) -> np.ndarray:
    """Element-wise hyperbolic tangent; maps finite input into (-1, 1)."""
    return np.tanh(np.asarray(e, dtype=np.float64))


def fit_layer_stats(
    train: "EmbeddingSet",
    *,
    tanh: bool = True,
    calibrate_w: bool = True,
    ridge0: float = DEFAULT_RIDGE0,
) -> LayerStatsModel:
    """Fit per-layer mean/covariance on a training set of known classes.

    With calibrate_w, each layer's scale is set to the reciprocal of the
    mean raw quadratic form over the fitting set, so the fitted features
    average exactly 1 per layer. Without it every scale is 1 and scores are
    plain quadratic forms against the regularized covariance.

    Raises:
        InsufficientSamples: Fewer than 2 training rows.
        OodInTrainingSet: Any training label is -1; rows marked as
            out-of-distribution must never leak into the fit.
        NotFactorizable: A layer covariance resists the ridge ladder.
    """
    if train.n < 2:
        raise InsufficientSamples(f"fitting needs n >= 2, got n={train.n}")
    if train.labels is not None and (train.labels < 0).any():
        raise OodInTrainingSet("training set contains labels marked -1")

    fits: list[GaussianFit] = []
    w = np.ones(train.k_layers, dtype=np.float64)
    for k in range(train.k_layers):
        H = np.asarray(train.embeddings[:, k, :], dtype=np.float64)
        if tanh:
            H = np.tanh(H)
        mu = sample_mean(H)
        cov = sample_cov(H, mu, 1.0)
        chol, ridge = cholesky_spd(cov, ridge0)
        if calibrate_w:
            raw = maha_sq_batch(
                GaussianFit(mean=mu, chol_lower=chol, applied_ridge=ridge), H
            )
            mean_raw = float(raw.mean())
            # mean_raw is 0 only when every row equals the mean exactly;
            # calibration is undefined there, keep the neutral scale.
            if mean_raw > 0:
                w[k] = 1.0 / mean_raw
        fits.append(
            GaussianFit(
                mean=mu,
                chol_lower=chol / np.sqrt(w[k]),
                applied_ridge=ridge,
            )
        )
    return LayerStatsModel(
        per_layer=tuple(fits),
        w=w,
        tanh_enabled=tanh,
        dim=train.dim,
        k_layers=train.k_layers,
    )


def featurize(model: LayerStatsModel, dataset: "EmbeddingSet") -> np.ndarray:
    """Per-layer Mahalanobis features for every utterance.

    Returns an (n, k_layers) float64 matrix; entry (i, k) is the scaled
    squared Mahalanobis distance of utterance i at layer k. Rows are
    independent, so permuting utterances permutes rows identically.

    Raises:
        DimensionMismatch: Set and model disagree on dim or k_layers.
    """
    if dataset.dim != model.dim or dataset.k_layers != model.k_layers:
        raise DimensionMismatch(
            f"data has (k_layers={dataset.k_layers}, dim={dataset.dim}), "
            f"model expects (k_layers={model.k_layers}, dim={model.dim})"
        )
    features = np.empty((dataset.n, model.k_layers), dtype=np.float64)
    for k in range(model.k_layers):
        H = np.asarray(dataset.embeddings[:, k, :], dtype=np.float64)
        if model.tanh_enabled:
            H = np.tanh(H)
        features[:, k] = maha_sq_batch(model.per_layer[k], H)
    return features
