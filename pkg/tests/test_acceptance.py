"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
Output capture is switched off so the verdict lines always reach the terminal.
"""
import math
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import brute_mmd2, quadrature_gfk, random_orthonormal  # noqa: E402

from mmdadapt import adaptnet  # noqa: E402
from mmdadapt.adaptnet import JointLossConfig, init_net, train  # noqa: E402
from mmdadapt.baselines import (MmdtConfig, daume_augment, gfk_compute, mmdt_train,  # noqa: E402
                                pmt_regularizer, pmt_regularizer_trig, pmt_train, sa_align,
                                sa_objective, sin2_angle, svm_objective, svm_train)
from mmdadapt.cli import random_tiny_case  # noqa: E402
from mmdadapt.data import (Shift, SplitSpec, dumps_features, make_splits,  # noqa: E402
                           offset_vector, synth_domains)
from mmdadapt.harness import ExperimentConfig, run_experiment, strip_footer  # noqa: E402
from mmdadapt.mmd import (KernelSpec, median_heuristic_gamma, mmd2_kernel, mmd_linear,  # noqa: E402
                         select_width)
from mmdadapt.numerics import Subspace  # noqa: E402


@pytest.fixture
def verdict(capsys):
    def report(n, title, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = (f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
                f"  [{elapsed:.1f}s < {limit:g}s]")
        with capsys.disabled():
            print("\n" + line, flush=True)
        assert ok, line
    return report


def sub(q):
    return Subspace(q, np.zeros(q.shape[0]))


def test_criterion_01_mmd_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 9))
        Xs = rng.standard_normal((int(rng.integers(5, 21)), d))
        Xt = rng.standard_normal((int(rng.integers(5, 21)), d)) + rng.uniform(0, 1)
        gamma = median_heuristic_gamma(Xs, Xt)
        for kind in ("linear", "rbf"):
            for unbiased in (False, True):
                got = mmd2_kernel(Xs, Xt, KernelSpec(kind, gamma), unbiased)
                worst = max(worst, abs(got - brute_mmd2(Xs, Xt, kind, gamma, unbiased)))
    verdict(1, "MMD oracle equivalence", worst <= 1e-10, f"max abs error {worst:.2e} (tol 1e-10)",
            time.perf_counter() - t0, 5)


def test_criterion_02_gradient_fidelity(verdict):
    t0 = time.perf_counter()
    worst, lams = 0.0, set()
    for seed in range(50):
        net, batches, cfg = random_tiny_case(seed, lam=(0.0, 0.25, 2.0)[seed % 3])
        assert net.input_dim <= 6 and net.width <= 4
        lams.add(cfg.lam)
        worst = max(worst, adaptnet.grad_check(net, batches, cfg, step=1e-5))
    verdict(2, "gradient fidelity", worst < 1e-4 and lams == {0.0, 0.25, 2.0},
            f"max relative error {worst:.2e} (tol 1e-4)", time.perf_counter() - t0, 30)


def test_criterion_03_domain_confusion_effect(verdict):
    t0 = time.perf_counter()
    shift = Shift(offset_vector(16, 2.0), math.radians(30))
    mmds = {0.0: [], 0.25: []}
    accs = {0.0: [], 0.25: []}
    for seed in range(5):
        src, tgt = synth_domains(5, 16, 40, 40, shift, 1.0, seed=seed)
        for lam in mmds:
            rep = train(init_net(16, 16, 5, seed=seed), src, None, tgt.features,
                        JointLossConfig(lam), seed=seed)
            mmds[lam].append(mmd_linear(adaptnet.activations(rep.net, src.features),
                                        adaptnet.activations(rep.net, tgt.features)))
            accs[lam].append(adaptnet.evaluate(rep.net, tgt))
    m0, m1 = np.mean(mmds[0.0]), np.mean(mmds[0.25])
    a0, a1 = np.mean(accs[0.0]), np.mean(accs[0.25])
    verdict(3, "domain-confusion effect", m1 <= 0.5 * m0 and a1 >= a0 - 0.02,
            f"mmd {m1:.3f} vs {m0:.3f} (ratio {m1 / m0:.3f} <= 0.5), "
            f"accuracy {a1:.3f} vs {a0:.3f}", time.perf_counter() - t0, 120)


def _relu_repr(params, X, backbone):
    H = X @ params["W0"] + params["b0"] if backbone else X
    return np.maximum(H @ params["W1"] + params["b1"], 0.0)


def test_criterion_04_width_selection(verdict):
    t0 = time.perf_counter()
    widths = (4, 8, 16, 32)
    agree = 0
    shift = Shift(offset_vector(16, 2.0), math.radians(30))
    for seed in range(5):
        src, tgt = synth_domains(5, 16, 40, 40, shift, 1.0, seed=seed)
        results, oracle = [], []
        for w in widths:
            rep = train(init_net(16, w, 5, seed=seed), src, None, tgt.features,
                        JointLossConfig(0.25), seed=seed)
            As, At = adaptnet.activations(rep.net, src.features), adaptnet.activations(rep.net, tgt.features)
            results.append((w, As, At))
            # recomputed from raw parameters with explicit per-coordinate loops
            Rs = _relu_repr(rep.net.params, src.features, True)
            Rt = _relu_repr(rep.net.params, tgt.features, True)
            diff = [sum(Rs[:, j]) / len(Rs) - sum(Rt[:, j]) / len(Rt) for j in range(w)]
            oracle.append((math.sqrt(sum(x * x for x in diff)), w))
        agree += select_width(results) == min(oracle)[1]
    verdict(4, "width selection consistency", agree == 5, f"{agree}/5 seeds match the argmin",
            time.perf_counter() - t0, 120)


def test_criterion_05_gfk_closed_form(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(4, 9))
        k = int(rng.integers(1, 4))
        U, V = random_orthonormal(rng, d, k), random_orthonormal(rng, d, k)
        G = gfk_compute(sub(U), sub(V)).G
        worst = max(worst, np.abs(G - quadrature_gfk(U, V)).max())
    U = random_orthonormal(rng, 6, 2)
    same = np.abs(gfk_compute(sub(U), sub(U)).G - U @ U.T).max()
    verdict(5, "GFK closed form", worst <= 1e-6 and same <= 1e-8,
            f"quadrature gap {worst:.2e} (tol 1e-6), equal-subspace gap {same:.2e} (tol 1e-8)",
            time.perf_counter() - t0, 30)


def test_criterion_06_sa_optimality(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    violations, worst_grad = 0, 0.0
    for _ in range(20):
        d = int(rng.integers(3, 9))
        k = int(rng.integers(1, d))
        U, V = sub(random_orthonormal(rng, d, k)), sub(random_orthonormal(rng, d, k))
        M = sa_align(U, V)
        best = sa_objective(U, V, M)
        for _ in range(100):
            P = M + rng.standard_normal(M.shape) * rng.uniform(1e-4, 1.0)
            violations += sa_objective(U, V, P) < best
        worst_grad = max(worst_grad, np.abs(U.basis.T @ (U.basis @ M - V.basis)).max())
    verdict(6, "SA optimality", violations == 0 and worst_grad <= 1e-10,
            f"{violations} better perturbations, first-order residual {worst_grad:.2e}",
            time.perf_counter() - t0, 10)


def test_criterion_07_pmt_limits(verdict):
    t0 = time.perf_counter()
    src, tgt = synth_domains(3, 5, 20, 6, Shift((), 0.4), 0.7, seed=0)
    theta = svm_train(src)
    gap = abs(svm_objective(pmt_train(theta, tgt, gamma=0.0), tgt, 1e-2)
              - svm_objective(svm_train(tgt, n_classes=3), tgt, 1e-2))
    clf = pmt_train(theta, tgt, gamma=1e6)
    worst_sin2 = max(sin2_angle(clf.weights[c], theta.weights[c]) for c in range(3))
    rng = np.random.default_rng(707)
    worst_id = 0.0
    for _ in range(100):
        th, tt = rng.standard_normal((2, 6))
        worst_id = max(worst_id, abs(pmt_regularizer(tt, th) - pmt_regularizer_trig(tt, th)))
    verdict(7, "PMT limits", gap <= 1e-3 and worst_sin2 < 1e-3 and worst_id <= 1e-12,
            f"gamma=0 objective gap {gap:.2e}, max sin^2 {worst_sin2:.2e}, identity gap {worst_id:.1e}",
            time.perf_counter() - t0, 30)


def test_criterion_08_mmdt_monotone(verdict):
    t0 = time.perf_counter()
    worst_rise = 0.0
    for seed in range(5):
        src, tgt = synth_domains(3, 4, 15, 4, Shift((), math.radians(30)), 0.5, seed=seed,
                                 class_sep=3.0)
        trace = mmdt_train(src, tgt, MmdtConfig(1.0, 1.0), outer_iters=10, epochs=200,
                           seed=seed).loss_trace
        assert len(trace) == 10
        worst_rise = max([worst_rise] + [b - a for a, b in zip(trace, trace[1:])])
    src, tgt = synth_domains(3, 4, 15, 4, Shift((), 0.5), 0.5, seed=9, class_sep=3.0)
    identity = np.array_equal(mmdt_train(src, tgt, MmdtConfig(1.0, 0.0), outer_iters=3).A,
                              np.eye(4))
    verdict(8, "MMDT monotonicity", worst_rise <= 1e-6 and identity,
            f"largest loss increase {worst_rise:.2e} (tol 1e-6), C_t=0 keeps A=I: {identity}",
            time.perf_counter() - t0, 60)


def _supervised_cfg(method, tmp_path):
    return ExperimentConfig.from_dict({
        "synthetic": "true", "method": method, "split.n_source_per_class": "20",
        "split.n_target_labeled_per_class": "3", "split.n_splits": "5",
        "output_dir": str(tmp_path / method)})


def test_criterion_09_daume(tmp_path, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    exact = True
    for _ in range(100):
        d = int(rng.integers(1, 8))
        x, z = rng.standard_normal((2, 1, d))
        xs, xt, zs, zt = (daume_augment(x, True), daume_augment(x, False),
                          daume_augment(z, True), daume_augment(z, False))
        zero = np.zeros_like(x)
        exact &= np.array_equal(xs, np.hstack([x, x, zero]))
        exact &= np.array_equal(xt, np.hstack([x, zero, x]))
        # exactly rounded sums, so equality does not depend on summation order
        ip = math.fsum((x * z).ravel())
        exact &= math.fsum((xs * zs).ravel()) == 2 * ip and math.fsum((xt * zt).ravel()) == 2 * ip
        exact &= math.fsum((xs * zt).ravel()) == ip and math.fsum((xt * zs).ravel()) == ip
    daume = run_experiment(_supervised_cfg("daume", tmp_path), write=False).mean
    source = run_experiment(_supervised_cfg("svm_source_only", tmp_path), write=False).mean
    verdict(9, "Daume identities", exact and daume >= source,
            f"identities exact: {exact}, accuracy daume {daume:.3f} vs source-only {source:.3f}",
            time.perf_counter() - t0, 60)


def test_criterion_10_protocol_fidelity(verdict):
    t0 = time.perf_counter()
    src, tgt = synth_domains(31, 32, 25, 10, Shift((), 0.3), 1.0, seed=3)
    ok = True
    for n_src in (20, 8):
        spec = SplitSpec(n_src, 3, 5, 7)
        runs = []
        for _ in range(2):
            splits = make_splits(src, tgt, spec)
            runs.append("".join(dumps_features(part) for s in splits for part in s))
        ok &= runs[0] == runs[1]
        assert len(splits) == 5
        for s in splits:
            ok &= all(c == n_src for c in np.bincount(s.source_train.labels, minlength=31))
            ok &= all(c == 3 for c in np.bincount(s.target_train_labeled.labels, minlength=31))
            labeled, test = set(s.target_train_labeled.ids), set(s.target_test.ids)
            ok &= not labeled & test and len(labeled | test) == len(tgt)
    verdict(10, "protocol fidelity", ok, f"counts, disjointness and byte identity hold: {ok}",
            time.perf_counter() - t0, 5)


def test_criterion_11_bench_determinism(tmp_path, verdict):
    t0 = time.perf_counter()
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("task = determinism\nsynthetic = true\noutput_dir = out\n")
    reports = []
    for run in range(2):
        proc = subprocess.run([sys.executable, "-m", "mmdadapt", "bench", "--config", str(cfg)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        out = tmp_path / "out"
        files = {p.name: p.read_text() for p in sorted(out.iterdir())}
        shutil.move(str(out), str(tmp_path / f"run{run}"))
        reports.append(files)

    same = reports[0].keys() == reports[1].keys() and all(
        strip_footer(reports[0][k]) == strip_footer(reports[1][k]) for k in reports[0])
    verdict(11, "end-to-end determinism", same,
            f"{len(reports[0])} output files identical modulo footer: {same}",
            time.perf_counter() - t0, 180)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
