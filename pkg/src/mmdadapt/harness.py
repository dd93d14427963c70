"""Experiment runner: config files, per-split dispatch, reports and curve emission.

Config files are flat ``key = value`` text with ``#`` comments.  Method
parameters use dotted keys such as ``pmt.gamma = 100``.
"""
import csv
import io
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import adaptnet, baselines
from .data import (Shift, SplitSpec, atomic_write, l2_normalize,
                   load_features, make_splits, offset_vector, synth_domains)
from .errors import AdaptError, InvalidArgumentError, SplitError
from .mmd import mmd_linear, rank_representations, select_width

METHODS = ("confusion_finetune", "svm_source_only", "late_fusion", "daume", "sa", "gfk",
           "pmt", "mmdt")
SUPERVISED_ONLY = ("late_fusion", "pmt", "mmdt")

DEFAULTS = {
    "task": "task",
    "method": "confusion_finetune",
    "output_dir": "out",
    "preprocess.l2_normalize": "false",
    "split.n_source_per_class": "20",
    "split.n_target_labeled_per_class": "3",
    "split.n_splits": "5",
    "split.seed": "0",
    "synthetic.n_classes": "5",
    "synthetic.dim": "16",
    "synthetic.n_per_class_source": "40",
    "synthetic.n_per_class_target": "40",
    "synthetic.rotation_deg": "30",
    "synthetic.offset_norm": "2",
    "synthetic.noise_sd": "1",
    "synthetic.class_sep": "4",
    "synthetic.seed": "0",
    "net.width": "16",
    "net.backbone": "true",
    "train.lambda": "0.25",
    "train.batch_size": "64",
    "train.base_lr": "0.001",
    "train.momentum": "0.9",
    "train.iterations": "1000",
    "train.eval_interval": "10",
    "svm.c_reg": "0.01",
    "svm.epochs": "1000",
    "svm.batch_size": "0",
    "subspace.k": "0",
    "fusion.mode": "max",
    "fusion.alpha": "0.5",
    "pmt.gamma": "100",
    "mmdt.c_s": "1",
    "mmdt.c_t": "1",
    "mmdt.outer_iters": "10",
}


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidArgumentError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def _flag(value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise InvalidArgumentError(f"expected a boolean, got {value!r}")


@dataclass
class ExperimentConfig:
    values: dict
    base_dir: str = "."

    def __post_init__(self):
        merged = dict(DEFAULTS)
        merged.update(self.values)
        self.values = merged
        has_files = "source" in self.values or "target" in self.values
        has_synth = _flag(self.values.get("synthetic", "false"))
        if has_files == has_synth:
            raise InvalidArgumentError(
                "config needs exactly one data source: source/target paths or synthetic = true")
        if has_files and not ("source" in self.values and "target" in self.values):
            raise InvalidArgumentError("both source and target paths are required")
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown method {self.method!r}; choose from {METHODS}")
        for key in self.values:
            if key not in DEFAULTS and key not in ("source", "target", "synthetic"):
                raise InvalidArgumentError(f"unknown config key {key!r}")
        if self.method in SUPERVISED_ONLY and not self.split.supervised:
            raise InvalidArgumentError(f"method {self.method} needs labeled target examples")

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc.strerror}") from None
        return cls(parse_config_text(text), os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, values, base_dir="."):
        return cls({k: str(v) for k, v in values.items()}, base_dir)

    def get(self, key):
        return self.values[key]

    def getint(self, key):
        try:
            return int(self.values[key])
        except ValueError:
            raise InvalidArgumentError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def getfloat(self, key):
        try:
            return float(self.values[key])
        except ValueError:
            raise InvalidArgumentError(f"{key} must be a number, got {self.values[key]!r}") from None

    def getflag(self, key):
        return _flag(self.values[key])

    def path(self, key):
        p = self.values[key]
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def with_overrides(self, **kv):
        vals = dict(self.values)
        vals.update({k.replace("__", "."): str(v) for k, v in kv.items()})
        return ExperimentConfig(vals, self.base_dir)

    @property
    def method(self):
        return self.values["method"]

    @property
    def output_dir(self):
        return self.path("output_dir")

    @property
    def split(self):
        return SplitSpec(self.getint("split.n_source_per_class"),
                         self.getint("split.n_target_labeled_per_class"),
                         self.getint("split.n_splits"), self.getint("split.seed"))

    @property
    def svm(self):
        bs = self.getint("svm.batch_size")
        return baselines.SvmParams(self.getfloat("svm.c_reg"), self.getint("svm.epochs"),
                                   self.getint("split.seed"), bs or None)

    def loss_config(self, supervised):
        return adaptnet.JointLossConfig(self.getfloat("train.lambda"),
                                        self.getint("train.batch_size"), supervised)

    @property
    def optimizer(self):
        return adaptnet.OptimizerConfig(self.getfloat("train.base_lr"),
                                        self.getfloat("train.momentum"),
                                        self.getint("train.iterations"),
                                        self.getint("train.eval_interval"))

    def echo(self):
        return dict(sorted(self.values.items()))


def load_domains(cfg):
    """Source and target datasets named by the config (files or synthetic)."""
    if "source" in cfg.values:
        src = load_features(cfg.path("source"))
        tgt = load_features(cfg.path("target"))
        if src.dim != tgt.dim:
            raise InvalidArgumentError(f"source has {src.dim} features, target has {tgt.dim}")
    else:
        dim = cfg.getint("synthetic.dim")
        shift = Shift(offset_vector(dim, cfg.getfloat("synthetic.offset_norm")),
                      math.radians(cfg.getfloat("synthetic.rotation_deg")))
        src, tgt = synth_domains(cfg.getint("synthetic.n_classes"), dim,
                                 cfg.getint("synthetic.n_per_class_source"),
                                 cfg.getint("synthetic.n_per_class_target"), shift,
                                 cfg.getfloat("synthetic.noise_sd"),
                                 cfg.getint("synthetic.seed"),
                                 cfg.getfloat("synthetic.class_sep"))
    if cfg.getflag("preprocess.l2_normalize"):
        src = src.with_features(l2_normalize(src.features))
        tgt = tgt.with_features(l2_normalize(tgt.features))
    return src, tgt


@dataclass
class SplitResult:
    index: int
    accuracy: float
    mmd_input: float
    mmd_adapted: float = None
    train_report: adaptnet.TrainReport = None


@dataclass
class ExperimentReport:
    task: str
    method: str
    splits: list
    config: dict
    wall_clock_seconds: float = 0.0
    curves: dict = field(default_factory=dict)

    @property
    def accuracies(self):
        return [s.accuracy for s in self.splits]

    @property
    def mean(self):
        return float(np.mean(self.accuracies))

    @property
    def std_error(self):
        acc = self.accuracies
        if len(acc) < 2:
            return 0.0
        return float(np.std(acc, ddof=1) / math.sqrt(len(acc)))

    def body_items(self):
        items = [("task", self.task), ("method", self.method),
                 ("n_splits", len(self.splits)), ("mean_accuracy", self.mean),
                 ("std_error", self.std_error)]
        for s in self.splits:
            items.append((f"split.{s.index}.accuracy", s.accuracy))
            items.append((f"split.{s.index}.mmd_input", s.mmd_input))
            if s.mmd_adapted is not None:
                items.append((f"split.{s.index}.mmd_adapted", s.mmd_adapted))
        items += [(f"config.{k}", v) for k, v in self.config.items()]
        return items

    def to_kv(self):
        lines = [f"{k} = {_fmt(v)}" for k, v in self.body_items()]
        lines += ["", "[footer]", f"wall_clock_seconds = {self.wall_clock_seconds:.3f}"]
        return "\n".join(lines) + "\n"

    def to_text(self):
        lines = [f"Experiment {self.task}: method {self.method}",
                 f"accuracy {self.mean * 100:.2f} +/- {self.std_error * 100:.2f} "
                 f"(mean +/- standard error over {len(self.splits)} splits)", "",
                 "split  accuracy  mmd_input  mmd_adapted"]
        for s in self.splits:
            adapted = "-" if s.mmd_adapted is None else f"{s.mmd_adapted:.6f}"
            lines.append(f"{s.index:5d}  {s.accuracy:8.4f}  {s.mmd_input:9.6f}  {adapted}")
        lines += ["", "config:"] + [f"  {k} = {v}" for k, v in self.config.items()]
        lines += ["", "[footer]", f"wall clock: {self.wall_clock_seconds:.3f} s"]
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def strip_footer(text):
    """Report text without the wall-clock footer, for determinism comparisons."""
    return text.split("[footer]", 1)[0]


def _run_method(cfg, split):
    source, target_labeled, target_test = split
    method = cfg.method
    svm = cfg.svm
    k = cfg.getint("subspace.k") or None
    target_all = np.vstack([target_labeled.features, target_test.features]) \
        if len(target_labeled) else target_test.features
    result = SplitResult(split.index, 0.0, mmd_linear(source.features, target_all))
    tl = target_labeled if len(target_labeled) else None
    if method == "confusion_finetune":
        n_classes = max(source.n_classes, target_test.n_classes)
        net = adaptnet.init_net(source.dim, cfg.getint("net.width"), n_classes,
                                seed=cfg.getint("split.seed") * 1000 + split.index,
                                backbone=cfg.getflag("net.backbone"))
        rep = adaptnet.train(net, source, tl, target_test.features,
                             cfg.loss_config(tl is not None), cfg.optimizer,
                             seed=cfg.getint("split.seed") * 1000 + split.index, test=target_test)
        result.accuracy = adaptnet.evaluate(rep.net, target_test)
        result.mmd_adapted = mmd_linear(adaptnet.activations(rep.net, source.features),
                                        adaptnet.activations(rep.net, target_all))
        result.train_report = rep
    elif method == "svm_source_only":
        result.accuracy = baselines.source_only_classify(source, target_test, svm)
    elif method == "late_fusion":
        result.accuracy = baselines.late_fusion_classify(
            source, target_labeled, target_test, cfg.get("fusion.mode"),
            baselines.FusionConfig(cfg.getfloat("fusion.alpha")), svm)
    elif method == "daume":
        result.accuracy = baselines.daume_classify(source, tl, target_test, svm)
    elif method == "sa":
        result.accuracy = baselines.sa_adapt_and_classify(source, target_all, target_test, k, svm, tl)
    elif method == "gfk":
        result.accuracy = baselines.gfk_adapt_and_classify(source, target_all, target_test, k, svm, tl)
    elif method == "pmt":
        result.accuracy = baselines.pmt_classify(source, target_labeled, target_test,
                                                 cfg.getfloat("pmt.gamma"), svm)
    elif method == "mmdt":
        mcfg = baselines.MmdtConfig(cfg.getfloat("mmdt.c_s"), cfg.getfloat("mmdt.c_t"))
        result.accuracy = baselines.mmdt_classify(source, target_labeled, target_test, mcfg,
                                                  cfg.getint("mmdt.outer_iters"), svm)
    return result


def run_experiment(cfg, write=True):
    """Run the configured method on every split and aggregate accuracies."""
    start = time.perf_counter()
    source, target = load_domains(cfg)
    splits = make_splits(source, target, cfg.split)
    results = []
    for split in splits:
        try:
            results.append(_run_method(cfg, split))
        except AdaptError as exc:
            raise SplitError(split.index, exc) from exc
    report = ExperimentReport(cfg.get("task"), cfg.method, results, cfg.echo())
    report.wall_clock_seconds = time.perf_counter() - start
    if write:
        write_report(report, cfg.output_dir)
    return report


def write_report(report, outdir):
    atomic_write(os.path.join(outdir, "report.txt"), report.to_text())
    atomic_write(os.path.join(outdir, "report.kv"), report.to_kv())
    for s in report.splits:
        if s.train_report is not None:
            emit_learning_curve(s.train_report, os.path.join(outdir, f"curve_split{s.index}.csv"))


# ------------------------------------------------------------------ curves

CURVE_HEADER = ("iteration", "cls_loss", "mmd", "test_accuracy")


def learning_curve_csv(report):
    if not report.records:
        raise InvalidArgumentError("train report has no records")
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for r in report.records:
        acc = "" if r.test_accuracy is None else repr(float(r.test_accuracy))
        w.writerow([r.iteration, repr(float(r.cls_loss)), repr(float(r.mmd)), acc])
    return buf.getvalue()


def emit_learning_curve(report, path):
    """Write ``iteration,cls_loss,mmd,test_accuracy`` rows for external plotting."""
    atomic_write(path, learning_curve_csv(report))
    return path


def read_learning_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [adaptnet.TrainRecord(int(r["iteration"]), float(r["cls_loss"]), float(r["mmd"]),
                                 float(r["test_accuracy"]) if r["test_accuracy"] else None)
            for r in rows]


# -------------------------------------------------------- selection studies

@dataclass
class SelectionRow:
    candidate: str
    mmd: float
    accuracy: float = None
    selected: bool = False


def parse_widths(spec):
    """``"4,8,16"`` or a geometric range ``"64:4096:x2"``."""
    spec = spec.strip()
    try:
        if ":" in spec:
            lo, hi, step = spec.split(":")
            lo, hi = int(lo), int(hi)
            if not step.startswith("x"):
                raise ValueError
            factor = int(step[1:])
            if lo < 1 or hi < lo or factor < 2:
                raise ValueError
            widths = []
            w = lo
            while w <= hi:
                widths.append(w)
                w *= factor
            return widths
        widths = [int(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise InvalidArgumentError(f"bad width list {spec!r}") from None
    if not widths or min(widths) < 1:
        raise InvalidArgumentError(f"bad width list {spec!r}")
    return widths


def width_study(cfg, widths, split_index=0):
    """Train one network per width on one split; mark the MMD-minimizing width."""
    if not widths:
        raise InvalidArgumentError("no widths given")
    source, target = load_domains(cfg)
    split = make_splits(source, target, cfg.split)[split_index]
    src, tl, tt = split
    target_all = np.vstack([tl.features, tt.features]) if len(tl) else tt.features
    seed = cfg.getint("split.seed") * 1000 + split_index
    n_classes = max(src.n_classes, tt.n_classes)
    rows, reprs = [], []
    for w in widths:
        net = adaptnet.init_net(src.dim, w, n_classes, seed=seed, backbone=cfg.getflag("net.backbone"))
        rep = adaptnet.train(net, src, tl if len(tl) else None, tt.features,
                             cfg.loss_config(len(tl) > 0), cfg.optimizer, seed=seed)
        As = adaptnet.activations(rep.net, src.features)
        At = adaptnet.activations(rep.net, target_all)
        reprs.append((w, As, At))
        rows.append(SelectionRow(str(w), mmd_linear(As, At), adaptnet.evaluate(rep.net, tt)))
    best = select_width(reprs)
    for row in rows:
        row.selected = row.candidate == str(best)
    return rows


def layer_study(candidates, with_accuracy=False, svm=baselines.SvmParams()):
    """Rank ``(name, source_ds, target_ds)`` representations by linear MMD."""
    ranked = rank_representations([(n, s.features, t.features) for n, s, t in candidates])
    by_name = {n: (s, t) for n, s, t in candidates}
    rows = []
    for i, (name, value) in enumerate(ranked):
        acc = None
        if with_accuracy:
            s, t = by_name[name]
            acc = baselines.source_only_classify(s, t, svm)
        rows.append(SelectionRow(name, value, acc, i == 0))
    return rows


def run_selection_study(kind, cfg=None, widths=None, candidates=None, with_accuracy=False):
    if kind == "width":
        return width_study(cfg, widths)
    if kind == "layer":
        return layer_study(candidates, with_accuracy, cfg.svm if cfg else baselines.SvmParams())
    raise InvalidArgumentError(f"unknown selection kind {kind!r}")


def selection_csv(rows):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["candidate", "mmd", "accuracy", "selected"])
    for r in rows:
        w.writerow([r.candidate, repr(float(r.mmd)),
                    "" if r.accuracy is None else repr(float(r.accuracy)), int(r.selected)])
    return buf.getvalue()
