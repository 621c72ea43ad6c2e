"""Classifiers assembled from class-specific auto-encoders.

Each class owns a mean auto-encoder, a covariance auto-encoder, or both;
its score is the sum of member energies plus a learned calibration bias,
and the posterior over classes is the softmax of the scores.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .energy import energy_covariance, energy_mean
from .errors import ShapeError, UsageError
from .gae import GaeParams, MeanAeParams, init_gae, init_mean_ae
from .training import TrainConfig, train_gae, train_mean_ae


@dataclass
class ClassMember:
    mean: MeanAeParams | None = None
    cov: GaeParams | None = None

    def __post_init__(self):
        if self.mean is None and self.cov is None:
            raise UsageError("a class member needs a mean model, a covariance model, or both")
        if self.cov is not None and not self.cov.factors_tied:
            raise UsageError("covariance member must have wx == wy")
        if self.mean is not None and self.cov is not None and self.mean.dim != self.cov.dx:
            raise ShapeError("mean and covariance models disagree on input dimension")

    @property
    def dim(self):
        return self.mean.dim if self.mean is not None else self.cov.dx

    def energy(self, x):
        e = 0.0
        if self.mean is not None:
            e = e + energy_mean(self.mean, x)
        if self.cov is not None:
            e = e + energy_covariance(self.cov, x)
        return e

    def copy(self):
        return ClassMember(
            None if self.mean is None else self.mean.copy(),
            None if self.cov is None else self.cov.copy(),
        )


@dataclass
class ClassifierEnsemble:
    members: list
    biases: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.members) < 2:
            raise UsageError("an ensemble needs at least two classes")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise ShapeError(f"members disagree on input dimension: {sorted(dims)}")
        k = len(self.members)
        self.biases = np.zeros(k) if self.biases is None else np.asarray(self.biases, dtype=float)
        if self.biases.shape != (k,) or not np.all(np.isfinite(self.biases)):
            raise UsageError(f"biases must be {k} finite values")

    @property
    def n_classes(self):
        return len(self.members)

    @property
    def dim(self):
        return self.members[0].dim

    def copy(self):
        return ClassifierEnsemble([m.copy() for m in self.members], self.biases.copy())


def _energies(ens, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != ens.dim:
        raise ShapeError(f"expected inputs of dimension {ens.dim}, got {x.shape}")
    return np.stack([np.atleast_1d(m.energy(x)) for m in ens.members], axis=-1)


def class_scores(ens: ClassifierEnsemble, x):
    """Energies plus calibration biases; shape (K,) or (N, K)."""
    s = _energies(ens, x) + ens.biases
    return s[0] if np.ndim(x) == 1 else s


def posterior(ens: ClassifierEnsemble, x):
    return softmax(class_scores(ens, x), axis=-1)


def predict(ens: ClassifierEnsemble, x):
    """argmax of the scores; ties go to the lowest class index."""
    return np.argmax(class_scores(ens, x), axis=-1)


def evaluate_error(ens: ClassifierEnsemble, x, labels) -> float:
    labels = np.asarray(labels)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise UsageError("cannot evaluate on an empty set")
    return float(np.mean(predict(ens, x) != labels))


def mean_log_likelihood(ens, x, labels):
    s = class_scores(ens, np.atleast_2d(x))
    return float(np.mean(s[np.arange(len(labels)), labels] - logsumexp(s, axis=1)))


def _mean_energy_grads(m: MeanAeParams, x, weights):
    h = 1.0 / (1.0 + np.exp(-(x @ m.w.T + m.c)))
    wh = h * weights[:, None]
    return {"w": wh.T @ x, "c": wh.sum(axis=0), "a": weights @ x}


def _cov_energy_grads(p: GaeParams, x, weights):
    fx = x @ p.wx.T
    u = fx**2 @ p.wh.T + p.b
    h = p.activation(u) * weights[:, None]
    pooled = h @ p.wh
    return {"wf": 2.0 * (fx * pooled).T @ x, "wh": h.T @ fx**2, "b": h.sum(axis=0), "a": weights @ x}


def calibrate(
    ens: ClassifierEnsemble,
    x,
    labels,
    tune_members=False,
    lr=0.1,
    epochs=500,
    member_lr=None,
):
    """Maximum-likelihood fit of the calibration biases by gradient ascent.

    With ``tune_members`` the member parameters are updated as well,
    backpropagating the log-likelihood through the energy functions.
    Full-batch, so the result is deterministic.  Returns a new ensemble.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=int)
    n = x.shape[0]
    if n == 0:
        raise UsageError("calibration needs labelled data")
    k = ens.n_classes
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= k:
        raise UsageError(f"labels must be {n} class ids in [0, {k})")
    out = ens.copy()
    onehot = np.eye(k)[labels]
    member_lr = lr if member_lr is None else member_lr
    energies = _energies(out, x)
    for _ in range(epochs):
        p = softmax(energies + out.biases, axis=1)
        resid = onehot - p  # d(mean log-lik)/d(score), times n
        out.biases = out.biases + lr * resid.mean(axis=0)
        if tune_members:
            for i, m in enumerate(out.members):
                wts = resid[:, i] / n
                if m.mean is not None:
                    for name, g in _mean_energy_grads(m.mean, x, wts).items():
                        setattr(m.mean, name, getattr(m.mean, name) + member_lr * g)
                if m.cov is not None:
                    g = _cov_energy_grads(m.cov, x, wts)
                    m.cov.wx = m.cov.wx + member_lr * g["wf"]
                    m.cov.wy = m.cov.wx.copy()
                    m.cov.wh = m.cov.wh + member_lr * g["wh"]
                    m.cov.b = m.cov.b + member_lr * g["b"]
                    m.cov.ax = m.cov.ax + member_lr * g["a"]
                    m.cov.ay = m.cov.ax.copy()
            energies = _energies(out, x)
    return out


def train_class_models(
    x,
    labels,
    kind,
    cfg: TrainConfig,
    n_hidden=32,
    n_factors=32,
    n_mean_hidden=None,
    activation="sigmoid",
    threads=1,
):
    """Train one model per class on that class's rows.

    ``kind`` is ``"mean"``, ``"cov"`` or ``"mc"``.  Class ``k`` uses seed
    ``cfg.seed + k`` for initialization and mini-batch order, so results
    do not depend on ``threads``.  Returns an uncalibrated ensemble.
    """
    if kind not in ("mean", "cov", "mc"):
        raise UsageError(f"unknown ensemble kind {kind!r}")
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    classes = int(labels.max()) + 1 if labels.size else 0
    d = x.shape[1]
    n_mean_hidden = n_hidden if n_mean_hidden is None else n_mean_hidden

    def fit(k):
        rows = x[labels == k]
        seed = cfg.seed + k
        kcfg = cfg.replace(seed=seed)
        mean = cov = None
        if kind in ("mean", "mc"):
            mean, _ = train_mean_ae(rows, kcfg, init_mean_ae(d, n_mean_hidden, seed))
        if kind in ("cov", "mc"):
            init = init_gae(d, d, n_factors, n_hidden, activation, seed, tie_factors=True)
            cov, _ = train_gae(rows, None, kcfg.replace(mode="symmetric"), init)
        return ClassMember(mean, cov)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(fit, range(classes)))
    else:
        members = [fit(k) for k in range(classes)]
    return ClassifierEnsemble(members)


def combine(mean_ens: ClassifierEnsemble, cov_ens: ClassifierEnsemble) -> ClassifierEnsemble:
    """mcAES ensemble from separately trained mean and covariance members."""
    if mean_ens.n_classes != cov_ens.n_classes:
        raise UsageError("ensembles have different class counts")
    members = [
        ClassMember(m.mean.copy(), c.cov.copy()) for m, c in zip(mean_ens.members, cov_ens.members)
    ]
    return ClassifierEnsemble(members, mean_ens.biases + cov_ens.biases)
