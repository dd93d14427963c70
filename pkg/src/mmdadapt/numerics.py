"""Dense linear-algebra primitives: PCA, orthonormal complements, principal angles.

All factorizations route through ``np.linalg.svd``.  Singular vectors are
sign-normalized so that the largest-magnitude entry of each column is
positive, which makes every downstream quantity reproducible.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError

ORTHO_TOL = 1e-8


def as_feature_matrix(X, name="X"):
    """Validate ``X`` as a finite 2-D float matrix with at least one row and column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D matrix, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must have at least one row and one column, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return X


def fix_signs(B):
    """Flip columns so each column's largest-magnitude entry is positive."""
    B = np.array(B, dtype=float, copy=True)
    if B.size == 0:
        return B
    idx = np.argmax(np.abs(B), axis=0)
    signs = np.sign(B[idx, np.arange(B.shape[1])])
    signs[signs == 0] = 1.0
    return B * signs


@dataclass(frozen=True)
class Subspace:
    """Orthonormal ``basis`` (ambient_dim x k) with a centering ``mean``."""

    basis: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            raise InvalidArgumentError("basis must be 2-D")
        d, k = basis.shape
        if not 1 <= k <= d:
            raise InvalidArgumentError(f"subspace dimension {k} must be in [1, {d}]")
        mean = np.zeros(d) if self.mean is None else np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape != (d,):
            raise InvalidArgumentError(f"mean has length {mean.size}, expected {d}")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(k))) >= ORTHO_TOL:
            raise InvalidArgumentError("basis columns are not orthonormal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def from_basis(cls, basis, mean=None):
        return cls(np.asarray(basis, dtype=float), mean)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def k(self):
        return self.basis.shape[1]

    def project(self, X):
        """Orthogonal projection of rows of ``X`` onto the (uncentered) span."""
        return X @ self.basis @ self.basis.T


def pca(X, k):
    """Top-``k`` principal directions of the row-centered data.

    Returns a ``Subspace`` whose basis columns are ordered by descending
    singular value.
    """
    X = as_feature_matrix(X)
    n, d = X.shape
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= min(n - 1, d)):
        raise InvalidArgumentError(f"k={k} out of range [1, {min(n - 1, d)}] for {n}x{d} data")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    if s[0] <= np.finfo(float).eps * max(1.0, np.abs(X).max()) * max(n, d):
        raise DegenerateDataError("data has zero variance; principal directions undefined")
    basis = fix_signs(vt[:k].T)
    return Subspace(basis, mean)


def default_subspace_dim(n_cols, n_source, n_target, cap=20):
    return max(1, min(n_cols, cap, n_source - 1, n_target - 1))


def orthonormal_complement(S):
    """Basis (ambient_dim x (ambient_dim - k)) of the orthogonal complement of ``S``."""
    d, k = S.basis.shape
    if k >= d:
        raise InvalidArgumentError("subspace spans the whole space; complement is empty")
    u, _, _ = np.linalg.svd(S.basis, full_matrices=True)
    R = u[:, k:]
    # re-orthogonalize against the basis to absorb rounding
    R = R - S.basis @ (S.basis.T @ R)
    q, _ = np.linalg.qr(R)
    return fix_signs(q)


def _check_pair(U, V):
    if U.ambient_dim != V.ambient_dim or U.k != V.k:
        raise InvalidArgumentError(
            f"subspace shapes differ: {U.basis.shape} vs {V.basis.shape}")


def principal_angles(U, V):
    """Principal angles (radians, ascending) between two equal-dimension subspaces."""
    _check_pair(U, V)
    C = U.basis.T @ V.basis
    cos = np.clip(np.linalg.svd(C, compute_uv=False), 0.0, 1.0)  # descending
    # arccos loses half the digits near 0; small angles come from the sines instead
    sin = np.sort(np.clip(np.linalg.svd(V.basis - U.basis @ C, compute_uv=False), 0.0, 1.0))
    theta = np.where(cos > math.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.sort(theta)


def trapezoid(values, a, b):
    """Composite trapezoid rule over equally spaced samples along axis 0."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n < 1:
        raise InvalidArgumentError("need at least two samples")
    h = (b - a) / n
    return h * (values.sum(axis=0) - 0.5 * (values[0] + values[-1]))
