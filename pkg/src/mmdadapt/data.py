"""Labeled feature datasets: CSV ingestion, split protocol, synthetic domain shift.

CSV layout (UTF-8, LF, no quoting)::

    id,domain,label,f0,f1,...,f{d-1}
    a0,amazon,3,0.12,1.5,...
"""
import io
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidArgumentError, ParseError, ProtocolError
from .rng import XorShift64Star, derive_seed


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    domain: str = "unknown"
    ids: tuple = None
    n_classes: int = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise InvalidArgumentError("features must be a 2-D matrix")
        y = np.asarray(self.labels)
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise InvalidArgumentError("labels must be integers")
        y = y.astype(np.int64).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise InvalidArgumentError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if X.size and not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if y.size and y.min() < 0:
            raise InvalidArgumentError("labels must be nonnegative")
        ids = self.ids
        if ids is None:
            ids = tuple(f"{self.domain}-{i}" for i in range(X.shape[0]))
        ids = tuple(str(i) for i in ids)
        if len(ids) != X.shape[0]:
            raise InvalidArgumentError(f"{len(ids)} ids for {X.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate ids")
        n_classes = self.n_classes
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 0
        elif y.size and y.max() >= n_classes:
            raise InvalidArgumentError(f"label {y.max()} >= n_classes {n_classes}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "n_classes", int(n_classes))

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, rows):
        rows = list(rows)
        return LabeledDataset(self.features[rows].reshape(len(rows), self.dim),
                              self.labels[rows], self.domain,
                              tuple(self.ids[r] for r in rows), self.n_classes)

    def with_features(self, features):
        return LabeledDataset(features, self.labels, self.domain, self.ids, self.n_classes)

    def with_n_classes(self, n_classes):
        return LabeledDataset(self.features, self.labels, self.domain, self.ids, n_classes)

    def class_rows(self):
        """Map class index -> row indices in original order, for classes present."""
        out = {}
        for i, c in enumerate(self.labels.tolist()):
            out.setdefault(c, []).append(i)
        return dict(sorted(out.items()))

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.domain == other.domain and self.ids == other.ids
                and self.n_classes == other.n_classes
                and np.array_equal(self.labels, other.labels)
                and self.features.shape == other.features.shape
                and np.array_equal(self.features, other.features))

    __hash__ = None


def concat(datasets, domain=None):
    datasets = [d for d in datasets if len(d)]
    if not datasets:
        raise InvalidArgumentError("nothing to concatenate")
    return LabeledDataset(np.vstack([d.features for d in datasets]),
                          np.concatenate([d.labels for d in datasets]),
                          domain or datasets[0].domain,
                          sum((d.ids for d in datasets), ()),
                          max(d.n_classes for d in datasets))


def l2_normalize(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.where(norms > 0, norms, 1.0)


# --------------------------------------------------------------------- CSV

def dumps_features(ds):
    buf = io.StringIO(newline="")
    buf.write(",".join(["id", "domain", "label"] + [f"f{j}" for j in range(ds.dim)]) + "\n")
    for i in range(len(ds)):
        vals = ",".join(repr(float(v)) for v in ds.features[i])
        buf.write(f"{ds.ids[i]},{ds.domain},{int(ds.labels[i])}" + ("," + vals if vals else "") + "\n")
    return buf.getvalue()


def atomic_write(path, text):
    """Write text via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_features(ds, path):
    atomic_write(path, dumps_features(ds))


def loads_features(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty file", line=1)
    header = lines[0].split(",")
    if header[:3] != ["id", "domain", "label"]:
        raise ParseError("header must start with id,domain,label", line=1)
    dim = len(header) - 3
    if dim < 1:
        raise ParseError("header declares no feature columns", line=1)
    for j, name in enumerate(header[3:]):
        if name != f"f{j}":
            raise ParseError(f"expected column f{j}, found {name!r}", line=1)
    if len(lines) < 2:
        raise ParseError("no data rows", line=2)
    ids, labels, rows, domains = [], [], [], set()
    seen = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if line.endswith("\r"):
            raise ParseError("CRLF line ending", line=lineno)
        parts = line.split(",")
        if len(parts) != dim + 3:
            raise ParseError(f"expected {dim + 3} fields, found {len(parts)}", line=lineno)
        rid, dom, lab = parts[:3]
        if not rid:
            raise ParseError("empty id", line=lineno)
        if not lab.isdigit():
            raise ParseError(f"label {lab!r} is not a nonnegative integer", line=lineno)
        try:
            vals = [float(v) for v in parts[3:]]
        except ValueError as exc:
            raise ParseError(f"bad feature value ({exc})", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"line {lineno}: non-finite feature value in row {rid!r}")
        if rid in seen:
            raise DataError(f"line {lineno}: duplicate id {rid!r} (first on line {seen[rid]})")
        seen[rid] = lineno
        ids.append(rid)
        labels.append(int(lab))
        rows.append(vals)
        domains.add(dom)
    if len(domains) != 1:
        raise DataError(f"file mixes domains {sorted(domains)}")
    return LabeledDataset(np.array(rows, dtype=float), np.array(labels, dtype=np.int64),
                          domains.pop(), tuple(ids))


def load_features(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return loads_features(text)
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from None


# ------------------------------------------------------------------ splits

@dataclass(frozen=True)
class SplitSpec:
    n_source_per_class: int = 20
    n_target_labeled_per_class: int = 3
    n_splits: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_source_per_class < 0 or self.n_target_labeled_per_class < 0:
            raise InvalidArgumentError("per-class counts must be nonnegative")
        if self.n_splits < 1:
            raise InvalidArgumentError("n_splits must be at least 1")

    @property
    def supervised(self):
        return self.n_target_labeled_per_class > 0


@dataclass(frozen=True)
class Split:
    index: int
    source_train: LabeledDataset
    target_train_labeled: LabeledDataset
    target_test: LabeledDataset

    def __iter__(self):
        return iter((self.source_train, self.target_train_labeled, self.target_test))


def _check_counts(ds, need, role):
    for c, rows in ds.class_rows().items():
        if len(rows) < need:
            raise ProtocolError(
                f"{role} class {c} has {len(rows)} examples, protocol needs {need}")


def make_splits(source, target, spec):
    """Random train/test splits following the per-class sampling protocol.

    Split ``i`` depends only on ``(spec.seed, i)``.  Unsampled source rows
    are discarded; unsampled target rows form the test set.
    """
    _check_counts(source, spec.n_source_per_class, "source")
    _check_counts(target, spec.n_target_labeled_per_class + 1, "target")
    n_classes = max(source.n_classes, target.n_classes)
    source = source.with_n_classes(n_classes)
    target = target.with_n_classes(n_classes)
    splits = []
    for i in range(spec.n_splits):
        rng = XorShift64Star(derive_seed(spec.seed, i))
        src_rows = []
        for rows in source.class_rows().values():
            src_rows += [rows[j] for j in rng.sample(len(rows), spec.n_source_per_class)]
        tl_rows = []
        for rows in target.class_rows().values():
            tl_rows += [rows[j] for j in rng.sample(len(rows), spec.n_target_labeled_per_class)]
        taken = set(tl_rows)
        test_rows = [r for r in range(len(target)) if r not in taken]
        splits.append(Split(i, source.subset(sorted(src_rows)),
                            target.subset(sorted(tl_rows)), target.subset(test_rows)))
    return splits


# --------------------------------------------------------------- synthetic

@dataclass(frozen=True)
class Shift:
    mean_offset: tuple = ()
    rotation_angle: float = 0.0


def synth_domains(n_classes, dim, n_per_class_source, n_per_class_target,
                  shift=None, noise_sd=1.0, seed=0, class_sep=4.0):
    """Gaussian class blobs in a source domain and a shifted target domain.

    Class ``c`` has mean ``class_sep * e_c`` (a scaled simplex).  Target
    samples come from the same class means, are rotated by
    ``shift.rotation_angle`` in the first two coordinates and then
    translated by ``shift.mean_offset``.
    """
    if n_classes < 1 or n_per_class_source < 1 or n_per_class_target < 1:
        raise InvalidArgumentError("counts must be at least 1")
    if n_classes > dim:
        raise InvalidArgumentError(f"{n_classes} classes need dim >= {n_classes}")
    shift = shift or Shift()
    offset = np.zeros(dim)
    if len(shift.mean_offset):
        offset = np.asarray(shift.mean_offset, dtype=float)
        if offset.shape != (dim,):
            raise InvalidArgumentError(f"mean_offset must have length {dim}")
    if shift.rotation_angle and dim < 2:
        raise InvalidArgumentError("rotation needs dim >= 2")
    means = class_sep * np.eye(n_classes, dim)
    rng = XorShift64Star(derive_seed(seed, 0x5EED))

    def draw(n_per):
        labels = np.repeat(np.arange(n_classes), n_per)
        X = means[labels] + rng.normal((labels.size, dim), noise_sd)
        return X, labels

    Xs, ys = draw(n_per_class_source)
    Xt, yt = draw(n_per_class_target)
    if shift.rotation_angle:
        c, s = math.cos(shift.rotation_angle), math.sin(shift.rotation_angle)
        rot = np.eye(dim)
        rot[:2, :2] = [[c, -s], [s, c]]
        Xt = Xt @ rot.T
    Xt = Xt + offset
    src = LabeledDataset(Xs, ys, "source", tuple(f"s{i}" for i in range(len(ys))), n_classes)
    tgt = LabeledDataset(Xt, yt, "target", tuple(f"t{i}" for i in range(len(yt))), n_classes)
    return src, tgt


def offset_vector(dim, norm):
    """Offset of the given Euclidean norm spread evenly over all coordinates."""
    return np.full(dim, norm / math.sqrt(dim))
