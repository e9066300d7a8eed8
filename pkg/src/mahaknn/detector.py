"""KNN rejection scoring over Mahalanobis feature vectors.

The rejection score of a query is the Euclidean distance to its k-th
nearest stored training feature row (the largest of the k smallest
distances); higher means more anomalous. The acceptance threshold delta is
the upper contamination quantile of the training self-scores, where each
training row is scored against the full stored set with itself included.

Neighbor search is brute force and exact: stored sets are ~1e4 rows of
~12-dimensional features, where exactness and determinism are worth more
than an index. Distance ties cost nothing here because only the k-th
smallest value is needed, and that value is tie-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BadContamination, DimensionMismatch, EmptyInput, InsufficientSamples

DEFAULT_K_NEIGHBORS = 5
DEFAULT_CONTAMINATION = 0.01

# Query rows per chunk when scoring against a large stored set; bounds the
# transient (chunk x n_train) distance buffer.
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class KnnModel:
    """Stored training features plus the calibrated rejection threshold."""

    train_features: np.ndarray
    k_neighbors: int
    contamination: float
    delta: float

    @property
    def n_train(self) -> int:
        return int(self.train_features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.train_features.shape[1])


def _kth_distances(train: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Distance to the k-th nearest stored row for every query row."""
    out = np.empty(queries.shape[0], dtype=np.float64)
    for start in range(0, queries.shape[0], _CHUNK_ROWS):
        chunk = queries[start : start + _CHUNK_ROWS]
        # Differences computed directly (no norm expansion trick): keeps
        # translation invariance exact and distances non-negative.
        diff = chunk[:, None, :] - train[None, :, :]
        d2 = np.einsum("qnk,qnk->qn", diff, diff)
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        out[start : start + _CHUNK_ROWS] = np.sqrt(kth)
    return out


def calibrate_threshold(scores: np.ndarray, contamination: float) -> float:
    """Nearest-rank upper quantile of scores at the given contamination.

    Sorts ascending and returns the element at 1-based rank
    clamp(ceil((1 - contamination) * n), 1, n). The rank is computed with
    exact rational arithmetic on the received float, so the guarantee
    "fraction of scores strictly above the result <= contamination" holds
    for every (n, contamination) pair without float-rounding edge cases.

    Raises:
        EmptyInput: No scores.
        BadContamination: contamination outside (0, 0.5).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    n = scores.shape[0]
    if n < 1:
        raise EmptyInput("cannot calibrate a threshold on zero scores")
    if not (0.0 < contamination < 0.5):
        raise BadContamination(
            f"contamination must be in (0, 0.5), got {contamination}"
        )
    rank = math.ceil((1 - Fraction(contamination)) * n)
    rank = min(max(rank, 1), n)
    return float(np.sort(scores)[rank - 1])


def fit_knn(
    features: np.ndarray,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    contamination: float = DEFAULT_CONTAMINATION,
) -> KnnModel:
    """Store the training features and calibrate the rejection threshold.

    Self-scores are computed with each row's own zero distance included,
    matching the convention of scoring the fitted set; with k_neighbors=1
    this degenerates to all-zero self-scores, which the default k=5 avoids.

    Raises:
        InsufficientSamples: k_neighbors outside [1, n].
        BadContamination: contamination outside (0, 0.5).
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatch(f"features must be (n, K), got shape {features.shape}")
    n = features.shape[0]
    if not (1 <= k_neighbors <= n):
        raise InsufficientSamples(
            f"need 1 <= k_neighbors <= n, got k_neighbors={k_neighbors}, n={n}"
        )
    if not (0.0 < contamination < 0.5):
        raise BadContamination(
            f"contamination must be in (0, 0.5), got {contamination}"
        )
    self_scores = _kth_distances(features, features, k_neighbors)
    delta = calibrate_threshold(self_scores, contamination)
    return KnnModel(
        train_features=features,
        k_neighbors=int(k_neighbors),
        contamination=float(contamination),
        delta=float(delta),
    )


def knn_score(model: KnnModel, f: np.ndarray) -> float:
    """Rejection score of one feature vector; >= 0, higher = more anomalous.

    Raises:
        DimensionMismatch: Vector length differs from the stored features.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (model.n_features,):
        raise DimensionMismatch(
            f"expected a length-{model.n_features} feature vector, got shape {f.shape}"
        )
    return float(_kth_distances(model.train_features, f[None, :], model.k_neighbors)[0])


def knn_score_batch(model: KnnModel, features: np.ndarray) -> np.ndarray:
    """Rejection scores for each row of an (n, K) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"expected an (n, {model.n_features}) matrix, got shape {features.shape}"
        )
    return _kth_distances(model.train_features, features, model.k_neighbors)
