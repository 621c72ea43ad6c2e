"""Command-line entry point: ``gatedae <command> [options]``.

Every option can also come from ``--config FILE`` (``key = value`` lines,
``#`` comments); explicit flags override the file.  Each run first echoes
its resolved configuration as ``config.<key>=<value>`` lines, and all
results are printed as ``key=value`` lines.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import archive, classify, data, structured, verify
from .errors import (
    ArchiveError,
    CapabilityError,
    DivergenceError,
    InputError,
    ParseError,
    ShapeError,
    UsageError,
)
from .gae import init_gae, init_mean_ae
from .training import TrainConfig, train_gae, train_mean_ae

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3, 4


class ConfigError(UsageError):
    pass


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (type, default, choices, help); shared by several commands
_TRAINING = {
    "epochs": (int, 50, None, "training epochs"),
    "lr": (float, 0.01, None, "learning rate"),
    "momentum": (float, 0.9, None, "momentum coefficient"),
    "decay": (float, 0.0, None, "weight decay"),
    "corruption": (float, 0.0, None, "corruption level (masking probability or noise std)"),
    "corruption_kind": (str, "masking", ("masking", "gaussian", "none"), "corruption type"),
    "batch": (int, 100, None, "mini-batch size"),
    "seed": (int, 0, None, "random seed"),
    "hidden": (int, 32, None, "mapping / hidden units"),
    "factors": (int, 32, None, "factors"),
    "activation": (str, "sigmoid", ("sigmoid", "tanh", "linear", "relu"), "mapping-unit activation"),
}
_REFINE = {
    "max_iter": (int, 100, None, "refinement iterations (0 = MLP only)"),
    "step": (float, 0.003, None, "refinement step size"),
    "tol": (float, 1e-6, None, "energy-change tolerance"),
    "variant": (str, "y2", ("xy", "y2"), "refinement model: GAE_XY or GAE_Y2"),
}

OPTIONS = {
    "train": {
        "data": (str, None, None, "dataset path"),
        "kind": (str, "cov-gae", ("mean", "gae", "cov-gae", "mc"), "model kind"),
        "mode": (str, "symmetric", ("conditional", "symmetric"), "GAE objective (kind=gae)"),
        "standardize": (_bool, False, None, "standardize features first"),
        "out": (str, None, None, "archive path"),
        **_TRAINING,
    },
    "verify": {
        "seeds": (int, 100, None, "random models per suite (1 = quick mode)"),
        "seed": (int, 0, None, "base seed"),
        "break_tie_weights": (_bool, False, None, "untie the decoder (negative control)"),
    },
    "classify": {
        "data": (str, None, None, "class-labelled dataset path"),
        "kind": (str, "all", ("mean", "cov-gae", "mc", "all"), "ensembles to evaluate"),
        "test_fraction": (float, 0.25, None, "held-out fraction"),
        "calib_epochs": (int, 500, None, "calibration epochs"),
        "calib_lr": (float, 0.1, None, "calibration learning rate"),
        "threads": (int, 1, None, "worker threads for per-class training"),
        "model": (str, None, None, "evaluate a saved ensemble instead of training"),
        "out": (str, None, None, "write the trained ensemble here"),
        **_TRAINING,
    },
    "multilabel": {
        "data": (str, None, None, "binary-labelled dataset path"),
        "folds": (int, 1, None, "number of random 80/10/10 folds to run"),
        "mlp_hidden": (int, 32, None, "MLP hidden units"),
        "mlp_epochs": (int, 50, None, "MLP epochs"),
        "mlp_lr": (float, 0.5, None, "MLP learning rate"),
        "noise": (float, 0.1, None, "Gaussian noise std on y when training GAE_XY"),
        "threads": (int, 1, None, "accepted for symmetry; refinement is vectorized"),
        "predictions": (str, None, None, "write refined probabilities of the last fold here"),
        "out": (str, None, None, "archive prefix for the last fold's MLP and GAE"),
        **_TRAINING,
        **_REFINE,
    },
    "generate": {
        "generator": (str, "covariance-classes", ("covariance-classes", "correlated-labels"), "dataset generator"),
        "n": (int, 2000, None, "examples (per class for covariance-classes)"),
        "dim": (int, 16, None, "feature dimension"),
        "classes": (int, 2, None, "classes (covariance-classes)"),
        "labels": (int, 8, None, "labels (correlated-labels)"),
        "strength": (float, 0.9, None, "correlation strength"),
        "seed": (int, 0, None, "random seed"),
        "out": (str, None, None, "output path"),
    },
}


def build_parser():
    parser = argparse.ArgumentParser(prog="gatedae", description="Gated auto-encoder toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
        for name, (typ, default, choices, help_) in opts.items():
            flag = "--" + name.replace("_", "-")
            if typ is _bool:
                p.add_argument(flag, dest=name, nargs="?", const=True, type=_bool,
                               default=argparse.SUPPRESS, help=f"{help_} (default {default})")
            else:
                p.add_argument(flag, dest=name, type=typ, choices=choices,
                               default=argparse.SUPPRESS, help=f"{help_} (default {default})")
    return parser


def read_config_file(path, command):
    """Parse ``key = value`` lines into typed options for ``command``."""
    opts = OPTIONS[command]
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in opts:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r} for {command}")
        typ, _, choices, _ = opts[key]
        try:
            val = typ(value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
        if choices and val not in choices:
            raise ConfigError(f"{path}:{lineno}: {key} must be one of {choices}")
        out[key] = val
    return out


def resolve(command, flags):
    """Defaults, then the config file, then explicit flags."""
    cfg = {k: v[1] for k, v in OPTIONS[command].items()}
    flags = dict(flags)
    path = flags.pop("config", None)
    if path is not None:
        cfg.update(read_config_file(path, command))
    cfg.update(flags)
    return cfg


def echo(cfg, out):
    for key in sorted(cfg):
        print(f"config.{key}={cfg[key]}", file=out)


def _meta(cfg, **extra):
    """Archive metadata: the resolved config minus output paths, so that
    identical runs written to different files produce identical bytes."""
    keep = {k: v for k, v in cfg.items() if k not in ("out", "predictions")}
    return {"config": keep, **extra}


def _train_config(cfg, **extra):
    kind = cfg["corruption_kind"] if cfg["corruption"] > 0 else "none"
    return TrainConfig(
        learning_rate=cfg["lr"],
        momentum=cfg["momentum"],
        weight_decay=cfg["decay"],
        corruption_level=cfg["corruption"],
        corruption_kind=kind,
        batch_size=cfg["batch"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
        **extra,
    )


def _positive(cfg, *names):
    for n in names:
        if cfg[n] < 1:
            raise ConfigError(f"{n} must be >= 1")


def _require(cfg, *names):
    for n in names:
        if cfg[n] is None:
            raise ConfigError(f"--{n.replace('_', '-')} is required")


def _load(path, **schema):
    if not Path(path).is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    ds = data.load_dataset(path, **schema)
    if ds.n == 0:
        raise InputError(f"dataset {path} is empty")
    return ds


def cmd_train(cfg, out):
    _require(cfg, "data", "out")
    _positive(cfg, "hidden", "factors")
    tc = _train_config(cfg, mode=cfg["mode"])
    ds = _load(cfg["data"])
    x = ds.features
    if cfg["standardize"]:
        x = data.standardize(ds).dataset.features
    kind, seed = cfg["kind"], cfg["seed"]
    mean = cov = None
    reports = []
    if kind in ("mean", "mc"):
        mean, rep = train_mean_ae(x, tc, init_mean_ae(ds.dim, cfg["hidden"], seed), progress=out)
        reports.append(rep)
    if kind in ("cov-gae", "mc"):
        init = init_gae(ds.dim, ds.dim, cfg["factors"], cfg["hidden"], cfg["activation"], seed, tie_factors=True)
        cov, rep = train_gae(x, None, tc.replace(mode="symmetric"), init, progress=out)
        reports.append(rep)
    if kind == "gae":
        if ds.label_kind != "binary":
            raise ConfigError("kind=gae learns (features, label vector) pairs and needs a binary-labelled dataset")
        init = init_gae(ds.dim, ds.n_outputs, cfg["factors"], cfg["hidden"], cfg["activation"], seed)
        model, rep = train_gae(x, ds.labels, tc, init, progress=out)
        reports.append(rep)
    elif kind == "mc":
        model = classify.ClassMember(mean, cov)
    else:
        model = mean if kind == "mean" else cov
    archive.save_model(model, cfg["out"], meta=_meta(cfg))
    for i, rep in enumerate(reports):
        print(f"model={i} initial_loss={rep.initial_loss:.10g} final_train_loss={rep.train_loss[-1]:.10g}", file=out)
    print(f"archive={cfg['out']}", file=out)
    return EXIT_OK


def cmd_verify(cfg, out):
    _positive(cfg, "seeds")
    results = verify.run_all(cfg["seeds"], cfg["break_tie_weights"], cfg["seed"])
    for r in results:
        print(r.line(), file=out)
    ok = all(r.passed for r in results)
    print(f"status={'ok' if ok else 'fail'}", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def _split(n, fraction, seed):
    if not 0.0 < fraction < 1.0:
        raise ConfigError("test_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * fraction)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def cmd_classify(cfg, out):
    _require(cfg, "data")
    _positive(cfg, "hidden", "factors", "threads", "calib_epochs")
    tc = _train_config(cfg, mode="symmetric")
    ds = _load(cfg["data"])
    if ds.label_kind != "class":
        raise InputError("classify needs a class-labelled dataset")
    tr_idx, te_idx = _split(ds.n, cfg["test_fraction"], cfg["seed"])
    std = data.standardize(ds.subset(tr_idx))
    xtr, ytr = std.dataset.features, std.dataset.labels
    xte = data.apply_standardization(ds.features[te_idx], std.mean, std.std)
    yte = ds.labels[te_idx]
    print(f"n_train={tr_idx.size} n_test={te_idx.size} classes={ds.n_outputs}", file=out)

    def calibrated(ens):
        return classify.calibrate(ens, xtr, ytr, lr=cfg["calib_lr"], epochs=cfg["calib_epochs"])

    ensembles = {}
    if cfg["model"] is not None:
        ens, _ = archive.load_model(cfg["model"])
        if not isinstance(ens, classify.ClassifierEnsemble):
            raise ConfigError(f"{cfg['model']} does not hold a classifier ensemble")
        ensembles["loaded"] = ens
    else:
        kinds = ("mean", "cov-gae", "mc") if cfg["kind"] == "all" else (cfg["kind"],)
        if np.unique(ytr).size != ds.n_outputs or ds.n_outputs < 2:
            raise InputError("every class needs training examples")
        trained = {}
        common = dict(n_hidden=cfg["hidden"], n_factors=cfg["factors"], activation=cfg["activation"],
                      threads=cfg["threads"])
        if {"mean", "mc"} & set(kinds):
            trained["mean"] = classify.train_class_models(xtr, ytr, "mean", tc, **common)
        if {"cov-gae", "mc"} & set(kinds):
            trained["cov"] = classify.train_class_models(xtr, ytr, "cov", tc, **common)
        names = {"mean": "aes", "cov-gae": "caes", "mc": "mcaes"}
        for k in kinds:
            if k == "mc":
                ens = classify.combine(trained["mean"], trained["cov"])
            else:
                ens = trained["mean" if k == "mean" else "cov"]
            ensembles[names[k]] = calibrated(ens)
    for name, ens in ensembles.items():
        print(f"error_{name}={classify.evaluate_error(ens, xte, yte):.10g}", file=out)
    if cfg["out"] is not None:
        last = list(ensembles.values())[-1]
        archive.save_model(last, cfg["out"], meta=_meta(cfg, mean=std.mean.tolist(), std=std.std.tolist()))
        print(f"archive={cfg['out']}", file=out)
    return EXIT_OK


def cmd_multilabel(cfg, out):
    _require(cfg, "data")
    _positive(cfg, "hidden", "factors", "folds", "mlp_hidden", "mlp_epochs")
    variant = "gae_xy" if cfg["variant"] == "xy" else "gae_y2"
    opt = structured.LabelOptConfig(step=cfg["step"], tol=cfg["tol"], max_iter=cfg["max_iter"],
                                    variant=variant, train_noise_std=cfg["noise"])
    gae_cfg = _train_config(cfg)
    ds = _load(cfg["data"])
    if ds.label_kind != "binary":
        raise InputError("multilabel needs a binary-labelled dataset")
    folds = data.split_folds(ds.n, cfg["folds"], seed=cfg["seed"])
    errors = []
    for f, fold in enumerate(folds):
        tr, te = ds.subset(fold.train), ds.subset(fold.test)
        std = data.standardize(tr)
        xtr = std.dataset.features
        xte = data.apply_standardization(te.features, std.mean, std.std)
        mlp_cfg = TrainConfig(learning_rate=cfg["mlp_lr"], momentum=cfg["momentum"], epochs=cfg["mlp_epochs"],
                              batch_size=cfg["batch"], seed=cfg["seed"] + f)
        mlp, _ = structured.mlp_train(xtr, tr.labels, mlp_cfg, n_hidden=cfg["mlp_hidden"])
        g, _ = structured.train_label_gae(
            xtr, tr.labels, variant, gae_cfg.replace(seed=cfg["seed"] + f),
            n_factors=cfg["factors"], n_hidden=cfg["hidden"], noise_std=opt.train_noise_std,
            activation=cfg["activation"],
        )
        y0 = structured.mlp_forward(mlp, xte)
        y, _ = structured.refine_batch(g, xte, y0, opt)
        e0 = structured.multilabel_error(y0, te.labels)
        e1 = structured.multilabel_error(y, te.labels)
        errors.append((e0, e1))
        print(f"fold={f} mlp_error={e0:.10g} refined_error={e1:.10g}", file=out)
    e = np.array(errors)
    print(f"median_mlp_error={np.median(e[:, 0]):.10g} median_refined_error={np.median(e[:, 1]):.10g} "
          f"folds_improved={int(np.sum(e[:, 1] < e[:, 0]))}", file=out)
    if cfg["predictions"] is not None:
        with open(cfg["predictions"], "w") as fh:
            structured.write_predictions(y, fh)
        print(f"predictions={cfg['predictions']}", file=out)
    if cfg["out"] is not None:
        archive.save_model(mlp, cfg["out"] + ".mlp", meta=_meta(cfg))
        archive.save_model(g, cfg["out"] + ".gae", meta=_meta(cfg))
        print(f"archive={cfg['out']}.mlp archive={cfg['out']}.gae", file=out)
    return EXIT_OK


def cmd_generate(cfg, out):
    _require(cfg, "out")
    _positive(cfg, "n", "dim")
    if cfg["generator"] == "covariance-classes":
        _positive(cfg, "classes")
        ds = data.synth_covariance_classes(cfg["n"], cfg["dim"], cfg["classes"], seed=cfg["seed"],
                                           strength=cfg["strength"])
    else:
        ds = data.synth_correlated_labels(cfg["n"], cfg["dim"], cfg["labels"], strength=cfg["strength"],
                                          seed=cfg["seed"])
    data.save_dataset(ds, cfg["out"])
    print(f"n={ds.n} dim={ds.dim} outputs={ds.n_outputs} path={cfg['out']}", file=out)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "verify": cmd_verify,
    "classify": cmd_classify,
    "multilabel": cmd_multilabel,
    "generate": cmd_generate,
}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    flags = vars(args)
    command = flags.pop("command")
    try:
        cfg = resolve(command, flags)
        echo(cfg, out)
        return COMMANDS[command](cfg, out)
    except (FileNotFoundError, IsADirectoryError, ParseError, InputError, ShapeError, ArchiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
