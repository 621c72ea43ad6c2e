"""Datasets: text format, standardization, folds and synthetic generators.

Canonical text format: an optional header line ``#dims D L kind`` (``kind``
is ``class`` or ``binary``), then one example per row of whitespace
separated decimals: D features followed by the label columns (1 class id,
or L binary indicators).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InputError, ParseError, UsageError

LABEL_KINDS = ("class", "binary")


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    label_kind: str = "class"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise InputError("features must be an N x D matrix")
        if self.label_kind not in LABEL_KINDS:
            raise UsageError(f"label_kind must be one of {LABEL_KINDS}")
        labels = np.asarray(self.labels)
        n = self.features.shape[0]
        if self.label_kind == "class":
            labels = labels.reshape(-1)
            if labels.shape != (n,):
                raise InputError(f"expected {n} class labels, got {labels.shape}")
            if labels.size and (np.any(labels != np.round(labels)) or labels.min() < 0):
                raise InputError("class labels must be non-negative integers")
            labels = labels.astype(np.int64)
        else:
            if labels.ndim != 2 or labels.shape[0] != n:
                raise InputError(f"expected an {n} x L binary label matrix, got {labels.shape}")
            if not np.all((labels == 0) | (labels == 1)):
                raise InputError("binary labels must be 0 or 1")
            labels = labels.astype(np.float64)
        self.labels = labels
        if not np.all(np.isfinite(self.features)):
            raise InputError("features contain NaN or Inf")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def n_outputs(self):
        """K (number of classes) or L (number of binary labels)."""
        if self.label_kind == "binary":
            return self.labels.shape[1]
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, idx):
        return LabeledDataset(self.features[idx], self.labels[idx], self.label_kind, self.name, dict(self.meta))


def _parse_header(line, lineno):
    parts = line[1:].split()
    if len(parts) != 4 or parts[0] != "dims":
        raise ParseError("header must read '#dims D L kind'", lineno)
    try:
        d, l = int(parts[1]), int(parts[2])
    except ValueError:
        raise ParseError("header dimensions must be integers", lineno) from None
    if parts[3] not in LABEL_KINDS:
        raise ParseError(f"label kind must be one of {LABEL_KINDS}", lineno)
    return d, l, parts[3]


def load_dataset(path, dim=None, label_kind=None, n_labels=None, name=None) -> LabeledDataset:
    """Parse the canonical text format.

    The ``#dims`` header is required unless ``dim`` and ``label_kind`` are
    given; when both are present they must agree.
    """
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    header = None
    start = 0
    for i, line in enumerate(lines):
        if line.strip():
            if line.lstrip().startswith("#"):
                header = _parse_header(line.strip(), i + 1)
                start = i + 1
            break
    if header is not None:
        hd, hl, hk = header
        if (dim is not None and dim != hd) or (label_kind is not None and label_kind != hk):
            raise ParseError(f"header {header} disagrees with requested schema", 1)
        if n_labels is not None and n_labels != hl:
            raise ParseError(f"header declares {hl} labels, expected {n_labels}", 1)
        dim, n_labels, label_kind = hd, hl, hk
    elif dim is None or label_kind is None:
        raise ParseError("missing '#dims D L kind' header", 1)
    if label_kind not in LABEL_KINDS:
        raise UsageError(f"label_kind must be one of {LABEL_KINDS}")
    if label_kind == "class":
        n_labels = 1
    elif n_labels is None:
        raise UsageError("binary datasets need the number of labels")
    width = dim + n_labels

    rows = []
    for i in range(start, len(lines)):
        line = lines[i].strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != width:
            raise ParseError(f"expected {width} values, found {len(toks)}", i + 1)
        try:
            vals = [float(t) for t in toks]
        except ValueError as exc:
            raise ParseError(str(exc), i + 1) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", i + 1)
        if label_kind == "class":
            lab = vals[dim]
            if lab != int(lab) or lab < 0:
                raise ParseError(f"invalid class label {toks[dim]!r}", i + 1)
        elif any(v not in (0.0, 1.0) for v in vals[dim:]):
            raise ParseError("binary labels must be 0 or 1", i + 1)
        rows.append(vals)
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), width)
    labels = arr[:, dim] if label_kind == "class" else arr[:, dim:]
    return LabeledDataset(arr[:, :dim], labels, label_kind, name or path.stem)


def save_dataset(ds: LabeledDataset, path):
    l = 1 if ds.label_kind == "class" else ds.labels.shape[1]
    lab = ds.labels.reshape(ds.n, -1)
    with open(path, "w") as fh:
        fh.write(f"#dims {ds.dim} {l} {ds.label_kind}\n")
        for feat, y in zip(ds.features, lab):
            vals = [repr(float(v)) for v in feat]
            vals += [str(int(v)) for v in y]
            fh.write(" ".join(vals) + "\n")


class Standardization(NamedTuple):
    dataset: LabeledDataset
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # mask of dimensions left unscaled


def standardize(ds: LabeledDataset, min_std=1e-12) -> Standardization:
    """Zero mean, unit (population) standard deviation per feature."""
    if ds.n < 2:
        raise UsageError("standardization needs at least two examples")
    mean = ds.features.mean(axis=0)
    centered = ds.features - mean
    std = np.sqrt(np.mean(centered**2, axis=0))
    constant = std < min_std
    scale = np.where(constant, 1.0, std)
    out = LabeledDataset(centered / scale, ds.labels.copy(), ds.label_kind, ds.name, dict(ds.meta))
    return Standardization(out, mean, scale, constant)


def apply_standardization(features, mean, std):
    return (np.asarray(features, dtype=float) - mean) / std


class Fold(NamedTuple):
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def split_folds(n, folds=10, ratios=(0.8, 0.1, 0.1), seed=0):
    """Independent random train/val/test partitions, one per fold."""
    n = n.n if isinstance(n, LabeledDataset) else int(n)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError("ratios must be three non-negative numbers summing to 1")
    if folds < 1 or n < folds:
        raise UsageError(f"need at least {folds} examples for {folds} folds")
    n_val = int(round(n * ratios[1]))
    n_test = int(round(n * ratios[2]))
    n_train = n - n_val - n_test
    out = []
    for f in range(folds):
        perm = np.random.default_rng([seed, f]).permutation(n)
        out.append(Fold(
            np.sort(perm[:n_train]),
            np.sort(perm[n_train:n_train + n_val]),
            np.sort(perm[n_train + n_val:]),
        ))
    return out


def random_correlation(d, rng, rank=None, strength=1.0):
    """Unit-diagonal covariance from a random low-rank factor model."""
    rank = max(1, d // 4) if rank is None else rank
    loadings = rng.normal(size=(d, rank)) * strength
    cov = loadings @ loadings.T + np.eye(d)
    s = np.sqrt(np.diag(cov))
    return cov / np.outer(s, s)


def synth_covariance_classes(n_per_class, dim, n_classes, seed=0, rank=None, strength=2.0):
    """K zero-mean Gaussian classes that differ only in their correlations.

    Each class draws its own random unit-diagonal covariance, so per-class
    means (and per-feature variances) are identical across classes.  The
    generating covariances are kept in ``meta["covariances"]``.
    """
    if dim < 2:
        raise UsageError("dim must be at least 2")
    rng = np.random.default_rng(seed)
    covs = [random_correlation(dim, rng, rank, strength) for _ in range(n_classes)]
    feats = []
    for cov in covs:
        chol = np.linalg.cholesky(cov)
        feats.append(rng.normal(size=(n_per_class, dim)) @ chol.T)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    perm = rng.permutation(labels.size)
    return LabeledDataset(
        np.concatenate(feats)[perm],
        labels[perm],
        "class",
        "synth-covariance",
        {"covariances": covs, "seed": seed},
    )


def synth_correlated_labels(n, dim, n_labels, strength=1.0, seed=0, noise=1.0, signal=1.0):
    """Binary labels in correlated pairs with noisy linear feature views.

    Labels come in consecutive pairs (an odd last label is left single).
    Each pair shares a latent Bernoulli(1/2) factor; every label copies its
    pair's factor with probability ``strength`` and is an independent coin
    flip otherwise, so ``strength=0`` gives independent labels and
    ``strength=1`` identical pairs.  Features are a random linear view of
    the centred labels plus isotropic Gaussian noise, so each label is
    seen through its own direction in feature space.
    """
    if n_labels < 2:
        raise UsageError("need at least two labels")
    if not 0.0 <= strength <= 1.0:
        raise UsageError("strength must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    groups = np.arange(n_labels) // 2
    factors = rng.random((n, groups.max() + 1)) < 0.5
    copy = rng.random((n, n_labels)) < strength
    coins = rng.random((n, n_labels)) < 0.5
    labels = np.where(copy, factors[:, groups], coins).astype(np.float64)
    view = rng.normal(size=(n_labels, dim)) * (signal / np.sqrt(n_labels))
    feats = (2.0 * labels - 1.0) @ view + noise * rng.normal(size=(n, dim))
    return LabeledDataset(
        feats, labels, "binary", "synth-correlated-labels",
        {"view": view, "strength": strength, "seed": seed, "groups": groups},
    )
