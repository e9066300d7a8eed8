"""Dense statistics primitives: means, scaled covariance, Cholesky
factorization with a ridge ladder, and Mahalanobis quadratic forms.

All statistics are computed and stored in float64 regardless of the input
dtype: covariance inversion at embedding widths of several hundred
dimensions is too ill-conditioned for float32. Queries are evaluated by
forward substitution against the stored Cholesky factor instead of an
explicit inverse, which is O(d^2) per query and better conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    AsymmetricInput,
    DimensionMismatch,
    EmptyInput,
    InsufficientSamples,
    NotFactorizable,
)

# Ridge ladder: try 0, then base * 10^0 .. 10^(RIDGE_ESCALATIONS-1).
RIDGE_ESCALATIONS = 8
DEFAULT_RIDGE0 = 1e-6


@dataclass(frozen=True)
class GaussianFit:
    """Gaussian location/scale summary with a pre-factorized covariance.

    Attributes:
        mean: Length-d location vector (float64).
        chol_lower: Lower-triangular Cholesky factor of the regularized
            (and possibly rescaled) covariance, float64, shape (d, d).
        applied_ridge: Diagonal loading actually added before the
            factorization succeeded; 0.0 when none was needed. This is a
            fit-time diagnostic and is not persisted in model files.
    """

    mean: np.ndarray
    chol_lower: np.ndarray
    applied_ridge: float

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def sample_mean(X: np.ndarray) -> np.ndarray:
    """Component-wise arithmetic mean of the rows of X, in float64.

    Raises:
        EmptyInput: If X has no rows.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) matrix, got shape {X.shape}")
    if X.shape[0] < 1:
        raise EmptyInput("mean of an empty sample")
    return X.mean(axis=0)


def sample_cov(X: np.ndarray, mean: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Scaled sample covariance (scale / (n - 1)) * sum (x - mean)(x - mean)^T.

    The scale parameter carries an externally chosen rescaling of the
    covariance (1.0 for the plain estimator). The result is symmetrized
    entry-wise, so equality of C[i, j] and C[j, i] is exact.

    Raises:
        InsufficientSamples: If X has fewer than 2 rows.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    X = np.asarray(X, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise InsufficientSamples(f"covariance needs n >= 2, got n={n}")
    if X.shape[1] != mean.shape[0]:
        raise DimensionMismatch(
            f"mean has {mean.shape[0]} entries but rows have {X.shape[1]}"
        )
    centered = X - mean
    cov = centered.T @ centered
    # Exact symmetry before scaling; scalar multiply preserves it.
    cov = (cov + cov.T) * (0.5 * scale / (n - 1))
    return cov


def cholesky_spd(A: np.ndarray, ridge0: float = DEFAULT_RIDGE0) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of A + r*I for the smallest workable ridge r.

    The ladder is {0, b, 10b, ..., 10^7 b} with b = ridge0 * trace(A) / d
    (b = ridge0 when the trace is not positive, so an all-zero matrix still
    factorizes). Returns (chol_lower, applied_ridge).

    Raises:
        AsymmetricInput: If A deviates from symmetry by more than 1e-9
            relative Frobenius norm.
        NotFactorizable: If the ladder is exhausted.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    norm = float(np.linalg.norm(A))
    asym = float(np.linalg.norm(A - A.T))
    if asym > 1e-9 * max(norm, np.finfo(np.float64).tiny):
        raise AsymmetricInput(
            f"matrix asymmetry {asym:.3e} exceeds 1e-9 relative tolerance"
        )
    A = (A + A.T) * 0.5

    trace = float(np.trace(A))
    base = ridge0 * (trace / d) if trace > 0 else ridge0
    ridges = [0.0] + [base * 10.0**j for j in range(RIDGE_ESCALATIONS)]
    eye = np.eye(d)
    for ridge in ridges:
        try:
            L = np.linalg.cholesky(A + ridge * eye)
        except np.linalg.LinAlgError:
            continue
        return L, float(ridge)
    raise NotFactorizable(
        f"Cholesky failed for all ridges up to {ridges[-1]:.3e} (d={d})"
    )


def fit_gaussian(X: np.ndarray, ridge0: float = DEFAULT_RIDGE0, scale: float = 1.0) -> GaussianFit:
    """Fit mean and factorized covariance of the rows of X."""
    mean = sample_mean(X)
    cov = sample_cov(X, mean, scale)
    chol, ridge = cholesky_spd(cov, ridge0)
    return GaussianFit(mean=mean, chol_lower=chol, applied_ridge=ridge)


def maha_sq(fit: GaussianFit, x: np.ndarray) -> float:
    """Squared Mahalanobis distance of x from the fit.

    Solves chol_lower * z = (x - mean) by forward substitution and returns
    ||z||^2, which equals (x - mean)^T Sigma^{-1} (x - mean).

    Raises:
        DimensionMismatch: If x is not length-d.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (fit.dim,):
        raise DimensionMismatch(f"expected a length-{fit.dim} vector, got shape {x.shape}")
    z = solve_triangular(fit.chol_lower, x - fit.mean, lower=True, check_finite=False)
    return float(z @ z)


def maha_sq_batch(fit: GaussianFit, X: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distance for each row of X, shape (n,).

    Each column of the triangular solve is independent, so results match
    row-by-row maha_sq and are invariant under row permutation.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fit.dim:
        raise DimensionMismatch(
            f"expected an (n, {fit.dim}) matrix, got shape {X.shape}"
        )
    Z = solve_triangular(fit.chol_lower, (X - fit.mean).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", Z, Z)
