"""Command-line entry point (``mmdadapt`` / ``python -m mmdadapt``).

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Errors print one line to stderr: ``error[CODE]: message``.
"""
import argparse
import os
import sys

import numpy as np

from . import adaptnet, harness
from .data import LabeledDataset, atomic_write, load_features
from .errors import AdaptError, InvalidArgumentError
from .mmd import KernelSpec, median_heuristic_gamma, mmd2_kernel, mmd_linear


class UsageError(InvalidArgumentError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def cmd_mmd(args):
    src, tgt = load_features(args.source), load_features(args.target)
    if src.dim != tgt.dim:
        raise InvalidArgumentError(f"source has {src.dim} features, target has {tgt.dim}")
    print(f"mmd_linear = {mmd_linear(src.features, tgt.features)!r}")
    if args.kernel is not None or args.gamma is not None or args.unbiased:
        kind = args.kernel or "rbf"
        gamma = args.gamma
        if kind == "rbf" and gamma is None:
            gamma = median_heuristic_gamma(src.features, tgt.features)
        kernel = KernelSpec(kind, gamma if gamma is not None else 1.0)
        value = mmd2_kernel(src.features, tgt.features, kernel, args.unbiased)
        tag = "unbiased" if args.unbiased else "biased"
        extra = f" gamma={gamma!r}" if kind == "rbf" else ""
        print(f"mmd2_{kind}_{tag} = {value!r}{extra}")
    return 0


def _parse_pair(text):
    name, sep, paths = text.partition("=")
    src, comma, tgt = paths.partition(",")
    if not (sep and comma and name and src and tgt):
        raise UsageError(f"expected NAME=SOURCE.csv,TARGET.csv, got {text!r}")
    return name, src, tgt


def cmd_select_layer(args):
    cands = []
    for text in args.pairs:
        name, s, t = _parse_pair(text)
        cands.append((name, load_features(s), load_features(t)))
    rows = harness.layer_study(cands, with_accuracy=args.accuracy)
    _emit(harness.selection_csv(rows), args.out)
    return 0


def cmd_select_width(args):
    cfg = harness.ExperimentConfig.from_file(args.config)
    rows = harness.width_study(cfg, harness.parse_widths(args.widths))
    _emit(harness.selection_csv(rows), args.out or os.path.join(cfg.output_dir, "width_selection.csv"))
    return 0


def _emit(text, path):
    if path:
        atomic_write(path, text)
    sys.stdout.write(text)


def cmd_train(args):
    cfg = harness.ExperimentConfig.from_file(args.config).with_overrides(method="confusion_finetune")
    source, target = harness.load_domains(cfg)
    src, tl, tt = harness.make_splits(source, target, cfg.split)[0]
    seed = cfg.getint("split.seed") * 1000
    net = adaptnet.init_net(src.dim, cfg.getint("net.width"), max(src.n_classes, tt.n_classes),
                            seed=seed, backbone=cfg.getflag("net.backbone"))
    rep = adaptnet.train(net, src, tl if len(tl) else None, tt.features,
                         cfg.loss_config(len(tl) > 0), cfg.optimizer, seed=seed, test=tt)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    harness.emit_learning_curve(rep, os.path.join(out, "learning_curve.csv"))
    adaptnet.save_weights(rep.net, os.path.join(out, "weights.dbnt"))
    f = rep.final
    print(f"iterations = {f.iteration}\ncls_loss = {f.cls_loss!r}\nmmd = {f.mmd!r}\n"
          f"test_accuracy = {f.test_accuracy!r}")
    return 0


def _print_report(report):
    sys.stdout.write(harness.strip_footer(report.to_text()))


def cmd_baseline(args):
    cfg = harness.ExperimentConfig.from_file(args.config).with_overrides(method=args.method)
    _print_report(harness.run_experiment(cfg))
    return 0


def cmd_bench(args):
    cfg = harness.ExperimentConfig.from_file(args.config)
    _print_report(harness.run_experiment(cfg))
    return 0


def random_tiny_case(seed, lam=None):
    """A random small network and batches for gradient checking."""
    rng = np.random.default_rng(seed)
    d, w, c = int(rng.integers(1, 7)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
    net = adaptnet.init_net(d, w, c, seed=seed)
    for k in net.params:
        net.params[k] = net.params[k] + 0.3 * rng.standard_normal(net.params[k].shape)
    n = int(rng.integers(2, 7))
    labeled = LabeledDataset(rng.standard_normal((n, d)), rng.integers(0, c, n), n_classes=c)
    pools = (rng.standard_normal((int(rng.integers(2, 6)), d)),
             rng.standard_normal((int(rng.integers(2, 6)), d)) + 0.5)
    lam = float(rng.choice([0.0, 0.25, 2.0])) if lam is None else lam
    return net, (labeled,) + pools, adaptnet.JointLossConfig(lam=lam)


def cmd_gradcheck(args):
    worst = 0.0
    for i in range(args.count):
        net, batches, cfg = random_tiny_case(args.seed + i)
        worst = max(worst, adaptnet.grad_check(net, batches, cfg, args.step))
    print(f"max_relative_error = {worst!r}")
    if not worst < args.tol:
        raise NumericalCheckFailed(f"gradient check failed: {worst:.3e} >= {args.tol:.1e}")
    return 0


class NumericalCheckFailed(AdaptError):
    code = "E_NUMERIC"
    exit_status = 3


def build_parser():
    p = _Parser(prog="mmdadapt", description="MMD-based domain adaptation toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("mmd", help="MMD between two feature files")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--kernel", choices=("linear", "rbf"))
    s.add_argument("--gamma", type=float)
    s.add_argument("--unbiased", action="store_true")
    s.set_defaults(func=cmd_mmd)

    s = sub.add_parser("select-layer", help="rank representations by MMD")
    s.add_argument("pairs", nargs="+", metavar="NAME=SRC.csv,TGT.csv")
    s.add_argument("--accuracy", action="store_true", help="also report source-only SVM accuracy")
    s.add_argument("--out")
    s.set_defaults(func=cmd_select_layer)

    s = sub.add_parser("select-width", help="pick the adaptation-layer width by MMD")
    s.add_argument("--widths", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_select_width)

    s = sub.add_parser("train", help="fine-tune one network with the joint loss")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("baseline", help="run one baseline over all splits")
    s.add_argument("--method", required=True, choices=harness.METHODS)
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("bench", help="full split protocol for the configured method")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("gradcheck", help="finite-difference check of the joint-loss gradient")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--step", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except AdaptError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.code}]: {msg}", file=sys.stderr)
        return exc.exit_status
    except FloatingPointError as exc:
        print(f"error[E_NUMERIC]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
