import re
import subprocess
import sys

import numpy as np
import pytest

from mmdadapt import adaptnet
from mmdadapt.cli import main
from mmdadapt.data import LabeledDataset, save_features

ERROR_LINE = re.compile(r"^error\[E_[A-Z]+\]: \S.*$")


@pytest.fixture
def feature_files(tmp_path):
    rng = np.random.default_rng(0)
    y = np.repeat(np.arange(3), 8)
    paths = {}
    for name, shift in (("src", 0.0), ("tgt", 1.0), ("src2", 0.0), ("tgt2", 0.2)):
        X = 3 * np.eye(3, 4)[y] + rng.standard_normal((24, 4)) + shift
        p = tmp_path / f"{name}.csv"
        save_features(LabeledDataset(X, y, name, tuple(f"{name}{i}" for i in range(24))), p)
        paths[name] = str(p)
    return paths


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("task = cli\nsynthetic = true\nsynthetic.dim = 6\nsynthetic.n_classes = 3\n"
                 "synthetic.n_per_class_source = 15\nsynthetic.n_per_class_target = 10\n"
                 "split.n_source_per_class = 8\nsplit.n_splits = 2\ntrain.iterations = 40\n"
                 "svm.epochs = 100\noutput_dir = out\n")
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def assert_error(code, err, expected_code, status):
    assert code == status
    lines = err.strip().splitlines()
    assert len(lines) == 1 and ERROR_LINE.match(lines[0]), err
    assert lines[0].startswith(f"error[{expected_code}]")


def test_mmd_command(feature_files, capsys):
    code, out, _ = run(["mmd", feature_files["src"], feature_files["tgt"]], capsys)
    assert code == 0 and out.startswith("mmd_linear = ")
    code, out, _ = run(["mmd", feature_files["src"], feature_files["tgt"], "--kernel", "rbf",
                        "--unbiased"], capsys)
    assert code == 0 and "mmd2_rbf_unbiased" in out and "gamma=" in out
    code, out, _ = run(["mmd", feature_files["src"], feature_files["tgt"], "--kernel", "linear"],
                       capsys)
    assert "mmd2_linear_biased" in out


def test_select_layer(feature_files, tmp_path, capsys):
    pairs = [f"fc6={feature_files['src']},{feature_files['tgt']}",
             f"fc7={feature_files['src2']},{feature_files['tgt2']}"]
    code, out, _ = run(["select-layer", *pairs, "--out", str(tmp_path / "layers.csv")], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "candidate,mmd,accuracy,selected"
    assert lines[1].startswith("fc7,") and lines[1].endswith(",1")
    assert (tmp_path / "layers.csv").read_text() == out


def test_select_width(config, capsys):
    code, out, _ = run(["select-width", "--widths", "2,4", "--config", config], capsys)
    assert code == 0 and len(out.splitlines()) == 3
    assert sum(line.endswith(",1") for line in out.splitlines()[1:]) == 1


def test_train_writes_curve_and_weights(config, tmp_path, capsys):
    code, out, _ = run(["train", "--config", config], capsys)
    assert code == 0 and "test_accuracy" in out
    net = adaptnet.load_weights(tmp_path / "out" / "weights.dbnt")
    assert net.input_dim == 6
    assert (tmp_path / "out" / "learning_curve.csv").read_text().startswith("iteration,")


def test_baseline_and_bench(config, capsys):
    code, out, _ = run(["baseline", "--method", "sa", "--config", config], capsys)
    assert code == 0 and "method sa" in out
    code, out, _ = run(["bench", "--config", config], capsys)
    assert code == 0 and "confusion_finetune" in out


def test_gradcheck(capsys):
    code, out, _ = run(["gradcheck", "--seed", "3", "--count", "5"], capsys)
    assert code == 0
    assert float(out.split("=")[1]) < 1e-4


def test_gradcheck_failure_is_numeric(capsys):
    code, _, err = run(["gradcheck", "--count", "2", "--tol", "0"], capsys)
    assert_error(code, err, "E_NUMERIC", 3)


def test_usage_errors(capsys):
    code, _, err = run([], capsys)
    assert_error(code, err, "E_USAGE", 1)
    code, _, err = run(["baseline", "--method", "nope", "--config", "x"], capsys)
    assert_error(code, err, "E_USAGE", 1)
    code, _, err = run(["select-layer", "justaname"], capsys)
    assert_error(code, err, "E_USAGE", 1)


def test_data_errors(tmp_path, feature_files, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,domain,label,f0\na,x,0,NaN\n")
    code, _, err = run(["mmd", str(bad), feature_files["tgt"]], capsys)
    assert_error(code, err, "E_DATA", 2)
    bad.write_text("id,domain,label,f0\na,x,0\n")
    code, _, err = run(["mmd", str(bad), feature_files["tgt"]], capsys)
    assert_error(code, err, "E_PARSE", 2)
    assert "line 2" in err
    code, _, err = run(["mmd", str(tmp_path / "missing.csv"), feature_files["tgt"]], capsys)
    assert_error(code, err, "E_DATA", 2)


def test_protocol_error_is_data_error(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("synthetic = true\nsynthetic.n_per_class_source = 3\n"
                 "split.n_source_per_class = 20\n")
    code, _, err = run(["bench", "--config", str(p)], capsys)
    assert_error(code, err, "E_PROTOCOL", 2)


def test_module_entry_point(feature_files):
    proc = subprocess.run([sys.executable, "-m", "mmdadapt", "mmd", feature_files["src"],
                           feature_files["src"]], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "mmd_linear = 0.0"
    proc = subprocess.run([sys.executable, "-m", "mmdadapt", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and ERROR_LINE.match(proc.stderr.strip())
