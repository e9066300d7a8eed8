"""Reference detectors the multi-layer method is compared against.

All three operate on the classifier's last transformer layer (or its
logits) exactly as the original methods do — no tanh, single layer — so the
comparison isolates the value of multi-layer features:

* max-softmax: negated maximum softmax probability of the predicted class.
* MD: minimum class-conditional squared Mahalanobis distance under a tied
  covariance pooled across classes.
* RMD: MD minus the squared distance from a single background Gaussian fit
  over all training rows, which sharpens near-OOD separation.

Every score is oriented higher = more anomalous so one metrics module
serves all methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyLogits,
    MissingBackground,
    MissingLabels,
    OodInTrainingSet,
)
from .linalg import DEFAULT_RIDGE0, GaussianFit, cholesky_spd, fit_gaussian

if TYPE_CHECKING:
    from .tensorio import EmbeddingSet


@dataclass(frozen=True)
class MdModel:
    """Class-conditional Gaussian model with a tied covariance.

    Attributes:
        class_means: (M, d) per-class means on the chosen layer.
        shared_chol: Cholesky factor of the pooled within-class covariance.
        background: Gaussian over all training rows ignoring class; present
            when the relative variant is wanted.
        layer: Which layer the model was fitted on (negative = from the end).
    """

    class_means: np.ndarray
    shared_chol: np.ndarray
    background: GaussianFit | None
    layer: int

    @property
    def num_classes(self) -> int:
        return int(self.class_means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.class_means.shape[1])


def fit_md(
    train: "EmbeddingSet",
    layer: int = -1,
    ridge0: float = DEFAULT_RIDGE0,
    with_background: bool = True,
) -> MdModel:
    """Fit per-class means and the tied covariance on one layer.

    The tied covariance is the pooled within-class scatter divided by
    (n - M). The background fit (for the relative variant) is the plain
    Gaussian over all rows regardless of class.

    Raises:
        MissingLabels: Training set has no labels.
        OodInTrainingSet: A label is -1.
        ClassTooSmall: Fewer than 2 classes, or some class has < 2 samples.
    """
    if train.labels is None:
        raise MissingLabels("class-conditional fit needs labels")
    labels = np.asarray(train.labels)
    if (labels < 0).any():
        raise OodInTrainingSet("training set contains labels marked -1")
    m = train.num_classes if train.num_classes > 0 else int(labels.max()) + 1
    if m < 2:
        raise ClassTooSmall(f"need at least 2 classes, got {m}")

    E = np.asarray(train.embeddings[:, layer, :], dtype=np.float64)
    n, d = E.shape
    means = np.empty((m, d), dtype=np.float64)
    scatter = np.zeros((d, d), dtype=np.float64)
    for c in range(m):
        rows = E[labels == c]
        if rows.shape[0] < 2:
            raise ClassTooSmall(
                f"class {c} has {rows.shape[0]} samples; need at least 2"
            )
        means[c] = rows.mean(axis=0)
        centered = rows - means[c]
        scatter += centered.T @ centered
    cov = (scatter + scatter.T) * (0.5 / (n - m))
    chol, _ = cholesky_spd(cov, ridge0)
    background = fit_gaussian(E, ridge0) if with_background else None
    return MdModel(class_means=means, shared_chol=chol, background=background, layer=layer)


def _class_maha_sq(model: MdModel, E: np.ndarray) -> np.ndarray:
    """Squared distances to every class mean, shape (n, M)."""
    n = E.shape[0]
    out = np.empty((n, model.num_classes), dtype=np.float64)
    for c in range(model.num_classes):
        Z = solve_triangular(
            model.shared_chol, (E - model.class_means[c]).T, lower=True, check_finite=False
        )
        out[:, c] = np.einsum("ij,ij->j", Z, Z)
    return out


def md_score(model: MdModel, e: np.ndarray) -> float:
    """Minimum class-conditional squared Mahalanobis distance; >= 0."""
    return float(md_score_batch(model, np.asarray(e, dtype=np.float64)[None, :])[0])


def md_score_batch(model: MdModel, E: np.ndarray) -> np.ndarray:
    """md_score for each row of an (n, d) matrix."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != model.dim:
        raise DimensionMismatch(
            f"expected an (n, {model.dim}) matrix, got shape {E.shape}"
        )
    return _class_maha_sq(model, E).min(axis=1)


def rmd_score(model: MdModel, e: np.ndarray) -> float:
    """Class distance minus background distance; may be negative."""
    return float(rmd_score_batch(model, np.asarray(e, dtype=np.float64)[None, :])[0])


def rmd_score_batch(model: MdModel, E: np.ndarray) -> np.ndarray:
    """rmd_score for each row of an (n, d) matrix.

    Raises:
        MissingBackground: Model was fitted without the background Gaussian.
    """
    if model.background is None:
        raise MissingBackground("relative scoring needs the background fit")
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != model.dim:
        raise DimensionMismatch(
            f"expected an (n, {model.dim}) matrix, got shape {E.shape}"
        )
    class_term = _class_maha_sq(model, E).min(axis=1)
    Z = solve_triangular(
        model.background.chol_lower, (E - model.background.mean).T, lower=True, check_finite=False
    )
    return class_term - np.einsum("ij,ij->j", Z, Z)


def max_softmax_score(logits: np.ndarray) -> float:
    """Negated maximum softmax probability; in [-1, -1/M], higher = more OOD.

    Softmax is computed with max subtraction, so the score is invariant (to
    rounding) under adding a constant to every logit.

    Raises:
        EmptyLogits: logits has no entries.
    """
    logits = np.asarray(logits, dtype=np.float64).ravel()
    if logits.shape[0] == 0:
        raise EmptyLogits("cannot score an empty logit vector")
    shifted = logits - logits.max()
    probs = np.exp(shifted)
    return float(-(probs.max() / probs.sum()))


def max_softmax_score_batch(logits: np.ndarray) -> np.ndarray:
    """max_softmax_score for each row of an (n, M) matrix."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise EmptyLogits(f"expected an (n, M) logit matrix, got shape {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    return -(probs.max(axis=1) / probs.sum(axis=1))
