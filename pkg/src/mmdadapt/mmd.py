"""Maximum mean discrepancy estimators and MMD-driven model selection."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import InvalidArgumentError
from .numerics import as_feature_matrix


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise InvalidArgumentError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"rbf gamma must be positive, got {self.gamma}")

    def gram(self, A, B):
        if self.kind == "linear":
            return A @ B.T
        return np.exp(-self.gamma * cdist(A, B, "sqeuclidean"))


@dataclass(frozen=True)
class MmdReport:
    value: float
    estimator: str
    n_source: int
    n_target: int


def _pair(Xs, Xt):
    Xs = as_feature_matrix(Xs, "Xs")
    Xt = as_feature_matrix(Xt, "Xt")
    if Xs.shape[1] != Xt.shape[1]:
        raise InvalidArgumentError(
            f"column mismatch: source has {Xs.shape[1]}, target has {Xt.shape[1]}")
    return Xs, Xt


def mmd_linear(Xs, Xt):
    """Euclidean distance between the empirical feature means of two samples."""
    Xs, Xt = _pair(Xs, Xt)
    return float(np.linalg.norm(Xs.mean(axis=0) - Xt.mean(axis=0)))


def median_heuristic_gamma(Xs, Xt):
    """gamma = 1 / (2 m^2), m the median pairwise distance of the pooled sample."""
    Xs, Xt = _pair(Xs, Xt)
    pooled = np.vstack([Xs, Xt])
    if pooled.shape[0] < 2:
        raise InvalidArgumentError("median heuristic needs at least two points")
    m = float(np.median(pdist(pooled)))
    if m <= 0:
        raise InvalidArgumentError("median pairwise distance is zero; pick gamma explicitly")
    return 1.0 / (2.0 * m * m)


def mmd2_kernel(Xs, Xt, kernel=None, unbiased=False):
    """Squared kernel MMD.

    The biased (V-statistic) form averages every kernel entry; the unbiased
    (U-statistic) form drops the diagonals of the within-domain Gram
    matrices and can be negative.
    """
    Xs, Xt = _pair(Xs, Xt)
    kernel = kernel or KernelSpec("linear")
    m, n = Xs.shape[0], Xt.shape[0]
    Kss = kernel.gram(Xs, Xs)
    Ktt = kernel.gram(Xt, Xt)
    Kst = kernel.gram(Xs, Xt)
    if unbiased:
        if m < 2 or n < 2:
            raise InvalidArgumentError("unbiased MMD needs at least two rows per sample")
        ss = (Kss.sum() - np.trace(Kss)) / (m * (m - 1))
        tt = (Ktt.sum() - np.trace(Ktt)) / (n * (n - 1))
    else:
        ss = Kss.mean()
        tt = Ktt.mean()
    return float(ss + tt - 2.0 * Kst.mean())


def mmd_report(Xs, Xt, kernel=None, unbiased=False):
    """Bundle an MMD value with the tag of the estimator that produced it."""
    Xs, Xt = _pair(Xs, Xt)
    if kernel is None:
        value, tag = mmd_linear(Xs, Xt), "linear-mean"
    else:
        value = mmd2_kernel(Xs, Xt, kernel, unbiased)
        tag = f"{kernel.kind}-{'unbiased' if unbiased else 'biased'}-mmd2"
    return MmdReport(value, tag, Xs.shape[0], Xt.shape[0])


def rank_representations(candidates):
    """Order ``(name, Xs, Xt)`` candidates by ascending linear MMD.

    The first entry is the most domain-invariant representation.  Ties keep
    input order.
    """
    candidates = list(candidates)
    if not candidates:
        raise InvalidArgumentError("no candidate representations given")
    scored = [(name, mmd_linear(Xs, Xt)) for name, Xs, Xt in candidates]
    return sorted(scored, key=lambda item: item[1])  # stable sort keeps input order on ties


def select_width(results):
    """Width whose adaptation-layer activations have minimal linear MMD.

    ``results`` holds ``(width, Xs_repr, Xt_repr)``; ties go to the smaller width.
    """
    results = list(results)
    if not results:
        raise InvalidArgumentError("no widths given")
    scored = [(mmd_linear(Xs, Xt), int(w)) for w, Xs, Xt in results]
    return min(scored)[1]
