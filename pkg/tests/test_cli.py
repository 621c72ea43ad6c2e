import io
import time

import numpy as np
import pytest

from gatedae.archive import read_archive
from gatedae.cli import main, resolve
from gatedae.data import save_dataset, synth_correlated_labels, synth_covariance_classes
from gatedae.gae import init_gae


def run(*argv):
    out = io.StringIO()
    rc = main([str(a) for a in argv], out=out)
    return rc, out.getvalue()


def values(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and " " not in line)


@pytest.fixture(scope="module")
def cov_data(tmp_path_factory):
    p = tmp_path_factory.mktemp("d") / "cov.txt"
    save_dataset(synth_covariance_classes(60, 4, 2, seed=0), p)
    return p


@pytest.fixture(scope="module")
def label_data(tmp_path_factory):
    p = tmp_path_factory.mktemp("d") / "lab.txt"
    save_dataset(synth_correlated_labels(200, 5, 4, seed=0), p)
    return p


def test_train_twice_is_bit_identical(cov_data, tmp_path):
    args = ("train", "--data", cov_data, "--kind", "cov-gae", "--epochs", 1, "--seed", 7,
            "--hidden", 3, "--factors", 3, "--batch", 20)
    rc1, out1 = run(*args, "--out", tmp_path / "a")
    rc2, out2 = run(*args, "--out", tmp_path / "b")
    assert rc1 == rc2 == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    strip = lambda s: [ln for ln in s.splitlines() if "out=" not in ln and "archive=" not in ln]
    assert strip(out1) == strip(out2)
    assert "config.seed=7" in out1 and "epoch=1 train_loss=" in out1


def test_lr_zero_archive_holds_initial_parameters(cov_data, tmp_path):
    rc, _ = run("train", "--data", cov_data, "--kind", "cov-gae", "--lr", 0, "--epochs", 2,
                "--hidden", 3, "--factors", 2, "--seed", 4, "--activation", "tanh", "--out", tmp_path / "m")
    assert rc == 0
    _, tensors = read_archive(tmp_path / "m")
    init = init_gae(4, 4, 2, 3, "tanh", 4, tie_factors=True)
    for name in init.ARRAYS:
        assert np.array_equal(tensors[name], getattr(init, name))


@pytest.mark.parametrize("kind", ["mean", "mc"])
def test_train_other_kinds(cov_data, tmp_path, kind):
    rc, out = run("train", "--data", cov_data, "--kind", kind, "--epochs", 1, "--hidden", 2, "--factors", 2,
                  "--out", tmp_path / "m")
    assert rc == 0 and "model=0 " in out
    assert read_archive(tmp_path / "m")[0]["kind"] == ("mean_ae" if kind == "mean" else "mc")


def test_train_gae_on_label_pairs(label_data, cov_data, tmp_path):
    rc, _ = run("train", "--data", label_data, "--kind", "gae", "--epochs", 1, "--hidden", 2, "--factors", 2,
                "--out", tmp_path / "m")
    assert rc == 0
    rc, _ = run("train", "--data", cov_data, "--kind", "gae", "--epochs", 1, "--out", tmp_path / "m")
    assert rc == 2


def test_exit_codes(cov_data, tmp_path):
    assert run("train", "--data", tmp_path / "missing.txt", "--out", tmp_path / "m")[0] == 3
    assert run("train", "--data", cov_data, "--lr", -1, "--out", tmp_path / "m")[0] == 2
    assert run("train", "--data", cov_data, "--bogus", 1)[0] == 2
    assert run("train", "--data", cov_data)[0] == 2  # no --out
    bad = tmp_path / "bad.txt"
    bad.write_text("#dims 2 1 class\n0 x 0\n")
    assert run("train", "--data", bad, "--out", tmp_path / "m")[0] == 3
    diverging = ("--lr", 1e6, "--epochs", 3, "--activation", "linear")
    assert run("train", "--data", cov_data, *diverging, "--out", tmp_path / "m")[0] == 4


def test_config_file_merge(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nlr = 0.5\nepochs = 7\ncorruption-kind = gaussian\n")
    merged = resolve("train", {"config": str(cfg), "lr": 0.25})
    assert merged["lr"] == 0.25 and merged["epochs"] == 7 and merged["corruption_kind"] == "gaussian"
    assert merged["momentum"] == 0.9
    cfg.write_text("learning_speed = 3\n")
    assert run("train", "--config", cfg)[0] == 2
    cfg.write_text("epochs = many\n")
    assert run("train", "--config", cfg)[0] == 2
    assert run("train", "--config", tmp_path / "nope.cfg")[0] == 2


def test_verify_quick_mode_and_negative_control():
    t0 = time.perf_counter()
    rc, out = run("verify", "--seeds", 1)
    assert rc == 0 and time.perf_counter() - t0 < 10
    assert out.rstrip().endswith("status=ok")
    rc, out = run("verify", "--seeds", 10, "--break-tie-weights")
    assert rc == 1 and "status=FAIL" in out and out.rstrip().endswith("status=fail")


def test_classify_reports_all_three(cov_data, tmp_path):
    rc, out = run("classify", "--data", cov_data, "--epochs", 2, "--hidden", 2, "--factors", 2,
                  "--calib-epochs", 5, "--out", tmp_path / "ens")
    assert rc == 0
    v = values(out)
    for key in ("error_aes", "error_caes", "error_mcaes"):
        assert 0.0 <= float(v[key]) <= 1.0
    assert v["config.test_fraction"] == "0.25"
    rc, out2 = run("classify", "--data", cov_data, "--model", tmp_path / "ens", "--calib-epochs", 5)
    assert rc == 0 and float(values(out2)["error_loaded"]) == float(v["error_mcaes"])


def test_classify_rejects_label_vectors(label_data):
    assert run("classify", "--data", label_data, "--epochs", 1)[0] == 3


def test_multilabel_max_iter_zero_matches_mlp(label_data, tmp_path):
    rc, out = run("multilabel", "--data", label_data, "--folds", 2, "--max-iter", 0, "--epochs", 1,
                  "--mlp-epochs", 2, "--hidden", 2, "--factors", 2, "--predictions", tmp_path / "p.txt",
                  "--out", tmp_path / "m")
    assert rc == 0
    for line in out.splitlines():
        if line.startswith("fold="):
            parts = dict(kv.split("=") for kv in line.split())
            assert parts["mlp_error"] == parts["refined_error"]
    pred = np.loadtxt(tmp_path / "p.txt")
    assert pred.shape[1] == 4 and np.all((pred >= 0) & (pred <= 1))
    assert read_archive(tmp_path / "m.gae")[0]["kind"] == "gae"


def test_generate_is_deterministic(tmp_path):
    for gen in ("covariance-classes", "correlated-labels"):
        a = run("generate", "--generator", gen, "--n", 30, "--dim", 3, "--out", tmp_path / "a")
        b = run("generate", "--generator", gen, "--n", 30, "--dim", 3, "--out", tmp_path / "b")
        assert a[0] == b[0] == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
