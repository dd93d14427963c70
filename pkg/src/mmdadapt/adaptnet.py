"""Adaptation network trained with a joint classification + domain-confusion loss.

Architecture (row-vector convention, ``X`` is n x input_dim)::

    H = X @ W0 + b0                  backbone, identity-initialized, lr x1
    A = relu(H @ W1 + b1)            adaptation layer, lr x10
    P = softmax(A @ W2 + b2)         classifier, lr x10

The loss is mean cross-entropy over the labeled examples plus
``lam * ||mean(A_source_pool) - mean(A_target_pool)||^2``.
"""
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidArgumentError, TrainingDivergedError
from .rng import XorShift64Star, derive_seed

LR_MULTIPLIERS = {"backbone": 1.0, "adapt": 10.0, "classifier": 10.0}
PARAM_LAYER = {"W0": "backbone", "b0": "backbone", "W1": "adapt", "b1": "adapt",
               "W2": "classifier", "b2": "classifier"}
PARAM_ORDER = ("W0", "b0", "W1", "b1", "W2", "b2")


@dataclass
class AdaptationNet:
    params: dict
    has_backbone: bool = True

    @property
    def input_dim(self):
        return self.params["W1"].shape[0]

    @property
    def width(self):
        return self.params["W1"].shape[1]

    @property
    def n_classes(self):
        return self.params["W2"].shape[1]

    def param_names(self):
        return [k for k in PARAM_ORDER if k in self.params]

    def copy(self):
        return AdaptationNet({k: v.copy() for k, v in self.params.items()}, self.has_backbone)

    def lr_multiplier(self, name):
        return LR_MULTIPLIERS[PARAM_LAYER[name]]


@dataclass(frozen=True)
class JointLossConfig:
    lam: float = 0.25
    batch_size: int = 64
    supervised: bool = False

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise InvalidArgumentError(f"lambda must be a nonnegative number, got {self.lam}")
        if self.batch_size < 2 or self.batch_size % 2:
            raise InvalidArgumentError(f"batch_size must be even and >= 2, got {self.batch_size}")


@dataclass(frozen=True)
class OptimizerConfig:
    base_lr: float = 1e-3
    momentum: float = 0.9
    iterations: int = 1000
    eval_interval: int = 10

    def __post_init__(self):
        if self.base_lr <= 0 or not 0 <= self.momentum < 1:
            raise InvalidArgumentError("need base_lr > 0 and momentum in [0, 1)")
        if self.iterations < 0 or self.eval_interval < 1:
            raise InvalidArgumentError("need iterations >= 0 and eval_interval >= 1")


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    cls_loss: float
    mmd: float
    test_accuracy: float = None


@dataclass
class TrainReport:
    records: list
    net: AdaptationNet
    seed: int
    config: JointLossConfig = None
    optimizer: OptimizerConfig = None

    def __len__(self):
        return len(self.records)

    @property
    def final(self):
        return self.records[-1]


def init_net(input_dim, width, n_classes, seed=0, backbone=True):
    """He-initialized adaptation and classifier layers over an identity backbone."""
    for name, v in (("input_dim", input_dim), ("width", width), ("n_classes", n_classes)):
        if int(v) != v or v < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {v}")
    rng = XorShift64Star(derive_seed(seed, 0xADA9))
    params = {}
    if backbone:
        params["W0"] = np.eye(input_dim)
        params["b0"] = np.zeros(input_dim)
    params["W1"] = rng.normal((input_dim, width), math.sqrt(2.0 / input_dim))
    params["b1"] = np.zeros(width)
    params["W2"] = rng.normal((width, n_classes), math.sqrt(2.0 / width))
    params["b2"] = np.zeros(n_classes)
    return AdaptationNet(params, backbone)


def softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _check_input(net, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InvalidArgumentError(
            f"input has shape {X.shape}, network expects {net.input_dim} columns")
    return X


def _forward_cache(net, X):
    p = net.params
    H = X @ p["W0"] + p["b0"] if net.has_backbone else X
    Z1 = H @ p["W1"] + p["b1"]
    A = np.maximum(Z1, 0.0)
    P = softmax(A @ p["W2"] + p["b2"])
    return H, Z1, A, P


def forward(net, X):
    """Return ``(adapt_activations, class_probabilities)`` for rows of ``X``."""
    X = _check_input(net, X)
    _, _, A, P = _forward_cache(net, X)
    return A, P


def _check_batches(net, labeled, source_pool, target_pool):
    if labeled is None or len(labeled) == 0:
        raise InvalidArgumentError("labeled batch is empty")
    Xs = _check_input(net, source_pool)
    Xt = _check_input(net, target_pool)
    if Xs.shape[0] == 0 or Xt.shape[0] == 0:
        raise InvalidArgumentError("pool batch is empty")
    if labeled.labels.max() >= net.n_classes:
        raise InvalidArgumentError("label outside the network's classes")
    return _check_input(net, labeled.features), labeled.labels, Xs, Xt


def _cross_entropy(P, y):
    return float(-np.mean(np.log(np.maximum(P[np.arange(y.size), y], 1e-300))))


def _loss_terms_arrays(net, X, y, Xs, Xt):
    _, _, _, P = _forward_cache(net, X)
    _, _, As, _ = _forward_cache(net, Xs)
    _, _, At, _ = _forward_cache(net, Xt)
    return _cross_entropy(P, y), float(np.linalg.norm(As.mean(axis=0) - At.mean(axis=0)))


def loss_terms(net, labeled, source_pool, target_pool):
    """Cross-entropy and linear MMD (unsquared) for one set of batches."""
    return _loss_terms_arrays(net, *_check_batches(net, labeled, source_pool, target_pool))


def joint_loss(net, labeled, source_pool, target_pool, cfg):
    ce, mmd = loss_terms(net, labeled, source_pool, target_pool)
    return ce + cfg.lam * mmd * mmd


def _backprop(net, X, H, Z1, dA, dZ2=None):
    """Accumulate parameter gradients given d(loss)/dA (and optionally d/dlogits)."""
    p = net.params
    g = {}
    if dZ2 is not None:
        A = np.maximum(Z1, 0.0)
        g["W2"] = A.T @ dZ2
        g["b2"] = dZ2.sum(axis=0)
        dA = dA + dZ2 @ p["W2"].T
    dZ1 = dA * (Z1 > 0)
    g["W1"] = H.T @ dZ1
    g["b1"] = dZ1.sum(axis=0)
    if net.has_backbone:
        dH = dZ1 @ p["W1"].T
        g["W0"] = X.T @ dH
        g["b0"] = dH.sum(axis=0)
    return g


def _gradient_arrays(net, X, y, Xs, Xt, lam):
    grads = {k: np.zeros_like(v) for k, v in net.params.items()}
    H, Z1, A, P = _forward_cache(net, X)
    dZ2 = P.copy()
    dZ2[np.arange(y.size), y] -= 1.0
    dZ2 /= y.size
    for k, v in _backprop(net, X, H, Z1, np.zeros_like(A), dZ2).items():
        grads[k] += v
    if lam:
        Hs, Z1s, As, _ = _forward_cache(net, Xs)
        Ht, Z1t, At, _ = _forward_cache(net, Xt)
        coef = 2.0 * lam * (As.mean(axis=0) - At.mean(axis=0))
        dAs = np.broadcast_to(coef / Xs.shape[0], As.shape)
        dAt = np.broadcast_to(-coef / Xt.shape[0], At.shape)
        for k, v in _backprop(net, Xs, Hs, Z1s, dAs).items():
            grads[k] += v
        for k, v in _backprop(net, Xt, Ht, Z1t, dAt).items():
            grads[k] += v
    return grads


def gradient(net, labeled, source_pool, target_pool, cfg):
    """Exact gradient of ``joint_loss`` w.r.t. every parameter, keyed like ``net.params``."""
    X, y, Xs, Xt = _check_batches(net, labeled, source_pool, target_pool)
    return _gradient_arrays(net, X, y, Xs, Xt, cfg.lam)


def grad_check(net, batches, cfg, step=1e-5):
    """Worst coordinate-wise relative error between analytic and central-difference gradients.

    ``batches`` is ``(labeled, source_pool, target_pool)``.  Relative error is
    ``|a - f| / max(|a|, |f|, 1e-8)``.
    """
    if not step > 0:
        raise InvalidArgumentError("step must be positive")
    labeled, source_pool, target_pool = batches
    analytic = gradient(net, labeled, source_pool, target_pool, cfg)
    probe = net.copy()
    worst = 0.0
    for name in probe.param_names():
        theta = probe.params[name]
        flat = theta.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = joint_loss(probe, labeled, source_pool, target_pool, cfg)
            flat[i] = orig - step
            down = joint_loss(probe, labeled, source_pool, target_pool, cfg)
            flat[i] = orig
            f = (up - down) / (2.0 * step)
            a = analytic[name].reshape(-1)[i]
            worst = max(worst, float(abs(a - f) / max(abs(a), abs(f), 1e-8)))
    return worst


def predict(net, X):
    _, P = forward(net, X)
    return np.argmax(P, axis=1)  # argmax returns the first maximum: ties go to the lower class


def evaluate(net, test):
    """Multiclass accuracy of argmax predictions on ``test``."""
    if test is None or len(test) == 0:
        raise InvalidArgumentError("test set is empty")
    return float(np.mean(predict(net, test.features) == test.labels))


def sgd_step(net, grads, velocity, opt):
    """One momentum step in place; layer step size is ``base_lr * lr_multiplier``."""
    for name, g in grads.items():
        v = velocity[name]
        v *= opt.momentum
        v -= opt.base_lr * net.lr_multiplier(name) * g
        net.params[name] += v


def train(net, source, target_labeled, target_unlabeled, cfg=None, opt=None, seed=0,
          test=None):
    """Minibatch SGD with momentum on the joint loss.

    Each iteration draws ``batch_size/2`` rows from the source pool and from the
    target pool (unlabeled plus labeled target features) for the MMD term.  The
    classification term sees the source half of the batch and, when supervised,
    up to ``batch_size/2`` labeled target rows.  Per-parameter step size is
    ``base_lr * lr_multiplier``.  The input network is not modified.
    """
    cfg = cfg or JointLossConfig()
    opt = opt or OptimizerConfig()
    if cfg.supervised != (target_labeled is not None and len(target_labeled) > 0):
        raise InvalidArgumentError(
            "supervised flag requires labeled target data (and unsupervised forbids it)")
    Xs_all = _check_input(net, source.features)
    pools = [np.asarray(target_unlabeled, dtype=float).reshape(-1, net.input_dim)]
    if cfg.supervised:
        pools.append(_check_input(net, target_labeled.features))
    Xt_all = _check_input(net, np.vstack(pools))
    if len(source) == 0 or Xt_all.shape[0] == 0:
        raise InvalidArgumentError("source and target pools must be nonempty")
    if source.labels.max() >= net.n_classes:
        raise InvalidArgumentError("source label outside the network's classes")

    ys_all = source.labels
    if cfg.supervised:
        Xtl = _check_input(net, target_labeled.features)
        ytl = target_labeled.labels
        X_lab = np.vstack([Xs_all, Xtl])
        y_lab = np.concatenate([ys_all, ytl])
    else:
        X_lab, y_lab = Xs_all, ys_all

    net = net.copy()
    rng = XorShift64Star(derive_seed(seed, 0x7EA1))
    half = cfg.batch_size // 2
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}
    records = []

    def record(it):
        ce, mmd = _loss_terms_arrays(net, X_lab, y_lab, Xs_all, Xt_all)
        if not (math.isfinite(ce) and math.isfinite(mmd)):
            raise TrainingDivergedError(it)
        acc = evaluate(net, test) if test is not None and len(test) else None
        records.append(TrainRecord(it, ce, mmd, acc))

    # non-finite values are caught explicitly and reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        record(0)
        for it in range(1, opt.iterations + 1):
            s_idx = rng.indices(Xs_all.shape[0], half)
            t_idx = rng.indices(Xt_all.shape[0], half)
            Xb, yb = Xs_all[s_idx], ys_all[s_idx]
            if cfg.supervised:
                tl_idx = rng.indices(len(ytl), min(half, len(ytl)))
                Xb = np.vstack([Xb, Xtl[tl_idx]])
                yb = np.concatenate([yb, ytl[tl_idx]])
            grads = _gradient_arrays(net, Xb, yb, Xs_all[s_idx], Xt_all[t_idx], cfg.lam)
            if not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergedError(it)
            sgd_step(net, grads, velocity, opt)
            if it % opt.eval_interval == 0 or it == opt.iterations:
                record(it)
    return TrainReport(records, net, seed, cfg, opt)


def activations(net, X):
    return forward(net, X)[0]


# ---------------------------------------------------------- serialization

MAGIC = b"DBNT"
FORMAT_VERSION = 1


def dumps_weights(net):
    """Flat binary weights.

    Header: ``b"DBNT"``, then little-endian u32 version, input_dim, width,
    n_classes, has_backbone.  Body: W0, b0 (if backbone), W1, b1, W2, b2 as
    row-major float64 little-endian; weight matrices are stored (in x out).
    """
    head = MAGIC + struct.pack("<5I", FORMAT_VERSION, net.input_dim, net.width,
                               net.n_classes, int(net.has_backbone))
    body = b"".join(np.ascontiguousarray(net.params[k], dtype="<f8").tobytes()
                    for k in net.param_names())
    return head + body


def loads_weights(blob):
    if blob[:4] != MAGIC:
        raise DataError("not a DBNT weights file")
    if len(blob) < 24:
        raise DataError("truncated DBNT header")
    version, d, w, c, bb = struct.unpack("<5I", blob[4:24])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported DBNT version {version}")
    shapes = {"W0": (d, d), "b0": (d,), "W1": (d, w), "b1": (w,), "W2": (w, c), "b2": (c,)}
    names = [k for k in PARAM_ORDER if bb or k not in ("W0", "b0")]
    expected = 24 + 8 * sum(int(np.prod(shapes[k])) for k in names)
    if len(blob) != expected:
        raise DataError(f"DBNT size {len(blob)} bytes, expected {expected}")
    params, pos = {}, 24
    for k in names:
        n = int(np.prod(shapes[k]))
        params[k] = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(float).reshape(shapes[k])
        pos += 8 * n
    return AdaptationNet(params, bool(bb))


def save_weights(net, path):
    with open(path, "wb") as fh:
        fh.write(dumps_weights(net))


def load_weights(path):
    with open(path, "rb") as fh:
        return loads_weights(fh.read())
