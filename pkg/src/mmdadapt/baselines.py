"""Classical adaptation baselines and the shared one-vs-rest linear SVM solver.

Every hinge-loss problem here has the form::

    sum_c (c_reg/2) * (theta_c' Q_c theta_c + b_c^2)
          + sum_i w_i * max(0, 1 - y_ic (theta_c' x_i + b_c)) / sum_i w_i

with ``Q_c = I`` for a plain SVM and ``Q_c = I + gamma * (I - u_c u_c')`` for
PMT (``u_c`` the unit source hyperplane).  The bias is penalized like a
constant feature; an unpenalized bias stalls the 1/t step schedule.  The
solver takes proximal subgradient steps with step size ``1 / (c_reg * t)``: a
subgradient step on the hinge part followed by the exact proximal map of the
quadratic.  The best full objective seen (starting point included) is
returned, so the reported objective never exceeds the initial one.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .data import concat
from .errors import InvalidArgumentError
from .numerics import (as_feature_matrix, default_subspace_dim,
                       orthonormal_complement, pca)
from .rng import XorShift64Star, derive_seed

GFK_SMALL_ANGLE = 1e-8


@dataclass
class LinearClassifier:
    """One-vs-rest hyperplanes: ``score_c(x) = weights[c] @ x + bias[c]``."""

    weights: np.ndarray
    bias: np.ndarray
    objective_trace: list = field(default_factory=list)

    @property
    def trained_dim(self):
        return self.weights.shape[1]

    @property
    def n_classes(self):
        return self.weights.shape[0]

    def scores(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.trained_dim:
            raise InvalidArgumentError(
                f"input has shape {X.shape}, classifier expects {self.trained_dim} columns")
        return X @ self.weights.T + self.bias

    def predict(self, X):
        return np.argmax(self.scores(X), axis=1)

    def accuracy(self, ds):
        if len(ds) == 0:
            raise InvalidArgumentError("test set is empty")
        return float(np.mean(self.predict(ds.features) == ds.labels))


@dataclass(frozen=True)
class SvmParams:
    c_reg: float = 1e-2
    epochs: int = 1000
    seed: int = 0
    batch_size: int = None  # None: full batch


@dataclass(frozen=True)
class PmtConfig:
    gamma: float = 100.0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise InvalidArgumentError("PMT gamma must be nonnegative")


@dataclass(frozen=True)
class MmdtConfig:
    c_s: float = 1.0
    c_t: float = 1.0

    def __post_init__(self):
        if not (self.c_s > 0 and self.c_t >= 0):
            raise InvalidArgumentError("MMDT needs c_s > 0 and c_t >= 0")


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError("fusion alpha must lie in [0, 1]")


@dataclass
class GeodesicKernel:
    G: np.ndarray


# ------------------------------------------------------------- SVM solver

def ovr_targets(labels, n_classes):
    Y = -np.ones((labels.size, n_classes))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


class _Quadratic:
    """``(c_reg/2) theta' Q theta`` with ``Q = I + gamma (I - u u')`` per class."""

    def __init__(self, c_reg, directions=None, gamma=0.0):
        self.c_reg = c_reg
        self.gamma = gamma if directions is not None else 0.0
        self.U = directions

    def value(self, W, b):
        val = float(np.sum(W * W) + np.sum(b * b))
        if self.gamma:
            par = np.sum(W * self.U, axis=1)
            val += self.gamma * float(np.sum(W * W) - np.sum(par * par))
        return 0.5 * self.c_reg * val

    def prox(self, Z, eta):
        if not self.gamma:
            return Z / (1.0 + eta * self.c_reg)
        par = np.sum(Z * self.U, axis=1, keepdims=True) * self.U
        return par / (1.0 + eta * self.c_reg) + (Z - par) / (1.0 + eta * self.c_reg * (1.0 + self.gamma))


def _hinge(W, b, X, Y, w):
    margins = 1.0 - Y * (X @ W.T + b)
    return float(np.sum(w[:, None] * np.maximum(margins, 0.0)) / np.sum(w))


def _solve(X, Y, w, quad, epochs, seed, batch_size=None, init=None):
    """Proximal subgradient solver; returns (W, b, trace of full objective per epoch)."""
    n, d = X.shape
    c = Y.shape[1]
    W = np.zeros((c, d)) if init is None else np.array(init[0], dtype=float)
    b = np.zeros(c) if init is None else np.array(init[1], dtype=float)

    def objective(W, b):
        return quad.value(W, b) + _hinge(W, b, X, Y, w)

    best = (objective(W, b), W.copy(), b.copy())
    trace = [best[0]]
    rng = XorShift64Star(derive_seed(seed, 0x5F3))
    bs = n if batch_size is None else max(1, min(int(batch_size), n))
    t = 0
    for _ in range(epochs):
        order = list(range(n)) if bs == n else rng.permutation(n)
        for start in range(0, n, bs):
            rows = order[start:start + bs]
            Xb, Yb, wb = X[rows], Y[rows], w[rows]
            total = wb.sum()
            if total <= 0:
                continue
            t += 1
            eta = 1.0 / (quad.c_reg * t)
            active = (1.0 - Yb * (Xb @ W.T + b)) > 0
            M = np.where(active, Yb, 0.0) * wb[:, None]
            gW = -(M.T @ Xb) / total
            gb = -M.sum(axis=0) / total
            W = quad.prox(W - eta * gW, eta)
            b = (b - eta * gb) / (1.0 + eta * quad.c_reg)
        obj = objective(W, b)
        trace.append(obj)
        if obj < best[0]:
            best = (obj, W.copy(), b.copy())
    return best[1], best[2], trace


def _check_train_data(data):
    if len(data) == 0:
        raise InvalidArgumentError("training set is empty")
    if len(np.unique(data.labels)) < 2:
        raise InvalidArgumentError("need at least two classes to train an SVM")


def svm_train(data, c_reg=1e-2, epochs=1000, seed=0, batch_size=None, sample_weights=None,
              n_classes=None, init=None):
    """One-vs-rest linear SVM with unregularized biases."""
    _check_train_data(data)
    if not c_reg > 0:
        raise InvalidArgumentError("c_reg must be positive")
    X = as_feature_matrix(data.features)
    n_classes = n_classes or data.n_classes
    Y = ovr_targets(data.labels, n_classes)
    w = np.ones(len(data)) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    W, b, trace = _solve(X, Y, w, _Quadratic(c_reg), epochs, seed, batch_size, init)
    return LinearClassifier(W, b, trace)


def svm_objective(clf, data, c_reg, sample_weights=None):
    Y = ovr_targets(data.labels, clf.n_classes)
    w = np.ones(len(data)) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    return _Quadratic(c_reg).value(clf.weights, clf.bias) + _hinge(clf.weights, clf.bias, data.features, Y, w)


def _svm(data, svm):
    return svm_train(data, svm.c_reg, svm.epochs, svm.seed, svm.batch_size)


# ------------------------------------------------------------ Late fusion

def late_fusion(v_s, v_t, mode="max", cfg=None):
    """Combine source and target classifier scores elementwise."""
    v_s = np.asarray(v_s, dtype=float)
    v_t = np.asarray(v_t, dtype=float)
    if v_s.shape != v_t.shape:
        raise InvalidArgumentError(f"score shapes differ: {v_s.shape} vs {v_t.shape}")
    if mode == "max":
        return np.maximum(v_s, v_t)
    if mode == "interp":
        alpha = (cfg or FusionConfig()).alpha
        return (1.0 - alpha) * v_s + alpha * v_t
    raise InvalidArgumentError(f"unknown fusion mode {mode!r}")


def late_fusion_classify(source, target_labeled, target_test, mode="max", cfg=None,
                         svm=SvmParams()):
    n_classes = max(source.n_classes, target_labeled.n_classes, target_test.n_classes)
    src_clf = svm_train(source, svm.c_reg, svm.epochs, svm.seed, svm.batch_size, n_classes=n_classes)
    tgt_clf = svm_train(target_labeled, svm.c_reg, svm.epochs, svm.seed, svm.batch_size,
                        n_classes=n_classes)
    fused = late_fusion(src_clf.scores(target_test.features),
                        tgt_clf.scores(target_test.features), mode, cfg)
    return float(np.mean(np.argmax(fused, axis=1) == target_test.labels))


# ---------------------------------------------------------------- Daume III

def daume_augment(X, is_source):
    """Source rows become (x, x, 0); target rows become (x, 0, x)."""
    X = as_feature_matrix(X)
    Z = np.zeros_like(X)
    return np.hstack([X, X, Z]) if is_source else np.hstack([X, Z, X])


def daume_classify(source, target_labeled, target_test, svm=SvmParams()):
    parts = [source.with_features(daume_augment(source.features, True))]
    if target_labeled is not None and len(target_labeled):
        parts.append(target_labeled.with_features(daume_augment(target_labeled.features, False)))
    clf = _svm(concat(parts), svm)
    return clf.accuracy(target_test.with_features(daume_augment(target_test.features, False)))


# ----------------------------------------------------- Subspace alignment

def _check_pair(U, V):
    if U.ambient_dim != V.ambient_dim or U.k != V.k:
        raise InvalidArgumentError(
            f"subspace shapes differ: {U.basis.shape} vs {V.basis.shape}")


def sa_align(U, V):
    """Closed-form minimizer ``M = U' V`` of ``||U M - V||_F^2``."""
    _check_pair(U, V)
    return U.basis.T @ V.basis


def sa_objective(U, V, M):
    return float(np.sum((U.basis @ M - V.basis) ** 2))


def sa_transform(X, U, V, M=None):
    """Map target rows through ``U M V'`` after centering on the target mean.

    The source mean is added back so mapped rows live in source coordinates.
    Subspaces with zero mean give the bare linear map.
    """
    M = sa_align(U, V) if M is None else M
    X = as_feature_matrix(X)
    return (X - V.mean) @ V.basis @ M.T @ U.basis.T + U.mean


def _subspaces(source, target_features, k, proper=False):
    Xt = as_feature_matrix(target_features)
    if k is None:
        # GFK needs a proper subspace, so drop one dimension from the ceiling
        k = default_subspace_dim(source.dim - int(proper), len(source), Xt.shape[0])
    return pca(source.features, k), pca(Xt, k)


def _adapt_and_classify(source, target_labeled, target_test, mapper, svm):
    parts = [source]
    if target_labeled is not None and len(target_labeled):
        parts.append(target_labeled.with_features(mapper(target_labeled.features)))
    clf = _svm(concat(parts), svm)
    return clf.accuracy(target_test.with_features(mapper(target_test.features)))


def sa_adapt_and_classify(source, target_unlabeled, target_test, k=None, svm=SvmParams(),
                          target_labeled=None):
    U, V = _subspaces(source, target_unlabeled, k)
    M = sa_align(U, V)
    return _adapt_and_classify(source, target_labeled, target_test,
                               lambda X: sa_transform(X, U, V, M), svm)


# ---------------------------------------------------- Geodesic flow kernel

def _gfk_frame(U, V):
    """Pieces of the geodesic ``phi(t) = U P1 cos(t theta) - R P2 sin(t theta)``."""
    _check_pair(U, V)
    R = orthonormal_complement(U)
    P1, gam, Qt = np.linalg.svd(U.basis.T @ V.basis)
    gam = np.clip(gam, 0.0, 1.0)
    theta = np.arccos(gam)
    Q = Qt.T
    B = -(R.T @ V.basis @ Q)  # = P2 diag(sin theta)
    sin = np.sin(theta)
    P2 = np.zeros((R.shape[1], U.k))
    big = theta >= GFK_SMALL_ANGLE
    P2[:, big] = B[:, big] / sin[big]
    return U.basis @ P1, R @ P2, theta


def gfk_geodesic(U, V):
    """Return ``phi(t)`` as a function; ``phi(0)`` spans U and ``phi(1)`` spans V."""
    A, B, theta = _gfk_frame(U, V)

    def phi(t):
        return A * np.cos(t * theta) - B * np.sin(t * theta)

    return phi


def gfk_compute(U, V):
    """Closed-form ``G = int_0^1 phi(t) phi(t)' dt``."""
    A, B, theta = _gfk_frame(U, V)
    small = theta < GFK_SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    cos2 = np.where(small, 1.0, 0.5 + np.sin(2 * safe) / (4 * safe))
    sin2 = np.where(small, 0.0, 0.5 - np.sin(2 * safe) / (4 * safe))
    cossin = np.where(small, 0.0, np.sin(safe) ** 2 / (2 * safe))
    G = (A * cos2) @ A.T + (B * sin2) @ B.T - (A * cossin) @ B.T - (B * cossin) @ A.T
    return GeodesicKernel(0.5 * (G + G.T))


def gfk_transform(X, U, V, kernel=None):
    G = (kernel or gfk_compute(U, V)).G
    X = as_feature_matrix(X)
    return (X - V.mean) @ G + U.mean


def gfk_adapt_and_classify(source, target_unlabeled, target_test, k=None, svm=SvmParams(),
                           target_labeled=None):
    U, V = _subspaces(source, target_unlabeled, k, proper=True)
    if U.k == U.ambient_dim:
        raise InvalidArgumentError("GFK needs k < ambient dimension")
    kernel = gfk_compute(U, V)
    return _adapt_and_classify(source, target_labeled, target_test,
                               lambda X: gfk_transform(X, U, V, kernel), svm)


# ---------------------------------------------------------------------- PMT

def pmt_regularizer(theta_t, theta_s):
    """``||theta_t||^2 sin^2(angle)`` as the squared component orthogonal to ``theta_s``."""
    theta_t = np.asarray(theta_t, dtype=float)
    theta_s = np.asarray(theta_s, dtype=float)
    ns = float(theta_s @ theta_s)
    if ns == 0:
        raise InvalidArgumentError("source hyperplane is zero; angle undefined")
    return float(theta_t @ theta_t - (theta_s @ theta_t) ** 2 / ns)


def pmt_regularizer_trig(theta_t, theta_s):
    """Same quantity through the explicit angle."""
    theta_t = np.asarray(theta_t, dtype=float)
    theta_s = np.asarray(theta_s, dtype=float)
    nt, ns = np.linalg.norm(theta_t), np.linalg.norm(theta_s)
    if nt == 0:
        return 0.0
    alpha = math.acos(max(-1.0, min(1.0, float(theta_s @ theta_t) / (ns * nt))))
    return float(nt * nt * math.sin(alpha) ** 2)


def sin2_angle(theta_t, theta_s):
    nt2 = float(np.dot(theta_t, theta_t))
    return pmt_regularizer(theta_t, theta_s) / nt2 if nt2 else 0.0


def _pmt_quadratic(theta_source, c_reg, gamma):
    Ws = np.asarray(theta_source.weights, dtype=float)
    norms = np.linalg.norm(Ws, axis=1)
    if np.any(norms == 0):
        raise InvalidArgumentError("source hyperplane is zero; angle undefined")
    return _Quadratic(c_reg, Ws / norms[:, None], gamma)


def pmt_objective(clf, theta_source, target, gamma, c_reg=1e-2):
    quad = _pmt_quadratic(theta_source, c_reg, gamma)
    Y = ovr_targets(target.labels, clf.n_classes)
    return quad.value(clf.weights, clf.bias) + _hinge(clf.weights, clf.bias, target.features, Y,
                                            np.ones(len(target)))


def pmt_train(theta_source, target, gamma=100.0, epochs=1000, seed=0, c_reg=1e-2,
              batch_size=None):
    """Target hyperplanes penalized for leaving the direction of the source ones.

    Minimizes ``(c_reg/2)(||w||^2 + gamma ||w||^2 sin^2 angle(w, theta)) + hinge``
    per class; starts from the zero hyperplane.
    """
    if not gamma >= 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    _check_train_data(target)
    quad = _pmt_quadratic(theta_source, c_reg, gamma)
    Y = ovr_targets(target.labels, theta_source.n_classes)
    W, b, trace = _solve(as_feature_matrix(target.features), Y, np.ones(len(target)), quad,
                         epochs, seed, batch_size)
    return LinearClassifier(W, b, trace)


def pmt_classify(source, target_labeled, target_test, gamma=100.0, svm=SvmParams()):
    n_classes = max(source.n_classes, target_labeled.n_classes, target_test.n_classes)
    theta = svm_train(source, svm.c_reg, svm.epochs, svm.seed, svm.batch_size, n_classes=n_classes)
    clf = pmt_train(theta, target_labeled, gamma, svm.epochs, svm.seed, svm.c_reg, svm.batch_size)
    return clf.accuracy(target_test)


# --------------------------------------------------------------------- MMDT

@dataclass
class MmdtResult:
    classifier: LinearClassifier
    A: np.ndarray
    loss_trace: list


def mmdt_loss(clf, A, source, target, cfg, c_reg):
    """``(c_reg/2)(||theta||^2 + ||b||^2 + ||A - I||^2) + weighted hinge on source and A-mapped target``."""
    X, Y, w = _mmdt_stack(source, target, A, cfg, clf.n_classes)
    d = A.shape[0]
    return (_Quadratic(c_reg).value(clf.weights, clf.bias) + 0.5 * c_reg * float(np.sum((A - np.eye(d)) ** 2))
            + _hinge(clf.weights, clf.bias, X, Y, w))


def _mmdt_stack(source, target, A, cfg, n_classes):
    X = np.vstack([source.features, target.features @ A.T])
    Y = ovr_targets(np.concatenate([source.labels, target.labels]), n_classes)
    w = np.concatenate([np.full(len(source), cfg.c_s), np.full(len(target), cfg.c_t)])
    return X, Y, w


def _mmdt_transform_step(W, b, A, target, cfg, norm, c_reg, epochs):
    """Proximal subgradient on ``(c_reg/2)||A - I||^2 + (c_t/norm) sum hinge(A x)``."""
    d = A.shape[0]
    I = np.eye(d)
    Xt = target.features
    Y = ovr_targets(target.labels, W.shape[0])

    def objective(A):
        margins = 1.0 - Y * (Xt @ A.T @ W.T + b)
        return 0.5 * c_reg * float(np.sum((A - I) ** 2)) + cfg.c_t * float(np.sum(np.maximum(margins, 0))) / norm

    best = (objective(A), A.copy())
    for t in range(1, epochs + 1):
        eta = 1.0 / (c_reg * t)
        active = (1.0 - Y * (Xt @ A.T @ W.T + b)) > 0
        M = np.where(active, Y, 0.0)
        g = -(cfg.c_t / norm) * (W.T @ M.T @ Xt)
        A = (A - eta * g + eta * c_reg * I) / (1.0 + eta * c_reg)
        obj = objective(A)
        if obj < best[0]:
            best = (obj, A.copy())
    return best[1]


def mmdt_train(source, target, cfg=None, outer_iters=10, seed=0, c_reg=1e-2, epochs=1000,
               batch_size=None):
    """Alternate between the classifier and the target-to-source transform ``A``.

    Each half-step keeps its starting point unless it finds a lower objective,
    so the total loss is non-increasing across outer iterations.
    """
    cfg = cfg or MmdtConfig()
    if source.dim != target.dim:
        raise InvalidArgumentError(f"source dim {source.dim} != target dim {target.dim}")
    _check_train_data(source)
    n_classes = max(source.n_classes, target.n_classes)
    d = source.dim
    A = np.eye(d)
    W, b = np.zeros((n_classes, d)), np.zeros(n_classes)
    norm = cfg.c_s * len(source) + cfg.c_t * len(target)
    quad = _Quadratic(c_reg)
    losses = []
    for it in range(outer_iters):
        X, Y, w = _mmdt_stack(source, target, A, cfg, n_classes)
        W, b, _ = _solve(X, Y, w, quad, epochs, derive_seed(seed, it), batch_size,
                         init=None if it == 0 else (W, b))
        if cfg.c_t > 0:
            A = _mmdt_transform_step(W, b, A, target, cfg, norm, c_reg, epochs)
        losses.append(mmdt_loss(LinearClassifier(W, b), A, source, target, cfg, c_reg))
    return MmdtResult(LinearClassifier(W, b, losses), A, losses)


def mmdt_classify(source, target_labeled, target_test, cfg=None, outer_iters=10, svm=SvmParams()):
    res = mmdt_train(source, target_labeled, cfg, outer_iters, svm.seed, svm.c_reg, svm.epochs,
                     svm.batch_size)
    return res.classifier.accuracy(target_test.with_features(target_test.features @ res.A.T))


def source_only_classify(source, target_test, svm=SvmParams(), target_labeled=None):
    parts = [source] if target_labeled is None or not len(target_labeled) else [source, target_labeled]
    return _svm(concat(parts), svm).accuracy(target_test)
