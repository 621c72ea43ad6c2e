"""Multi-label post-classification.

A sigmoid MLP makes a fast initial guess of the label vector; a gated
auto-encoder then refines it by first-order optimization of its energy over
the label space, with the input held fixed.  ``gae_xy`` scores E(y|x) with
a conditional GAE trained on (x, y) pairs; ``gae_y2`` scores E(y) with a
covariance auto-encoder trained on (y, y), so it only sees label
correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import energy_conditional, energy_covariance, energy_covariance_grad, vector_field
from .errors import DivergenceError, ShapeError, UsageError
from .gae import GaeParams, _sigmoid, init_gae
from .training import TrainConfig, _fit, train_gae

VARIANTS = ("gae_xy", "gae_y2")
MAX_HALVINGS = 20


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    ARRAYS = ("w1", "b1", "w2", "b2")

    def __post_init__(self):
        for name in self.ARRAYS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h, d = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[1] != h or self.b2.shape != (self.w2.shape[0],):
            raise ShapeError("inconsistent MLP parameter shapes")
        for name in self.ARRAYS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ShapeError(f"non-finite entries in {name}")

    @classmethod
    def unchecked(cls, w1, b1, w2, b2):
        obj = cls.__new__(cls)
        obj.w1, obj.b1, obj.w2, obj.b2 = w1, b1, w2, b2
        return obj

    @property
    def dim(self):
        return self.w1.shape[1]

    @property
    def n_labels(self):
        return self.w2.shape[0]

    def arrays(self):
        return {name: getattr(self, name) for name in self.ARRAYS}

    def copy(self):
        return MlpParams(**{k: v.copy() for k, v in self.arrays().items()})


def init_mlp(dim, n_hidden, n_labels, seed=0):
    rng = np.random.default_rng(seed)
    b1 = 1.0 / np.sqrt(dim)
    b2 = 1.0 / np.sqrt(n_hidden)
    return MlpParams(
        rng.uniform(-b1, b1, (n_hidden, dim)),
        np.zeros(n_hidden),
        rng.uniform(-b2, b2, (n_labels, n_hidden)),
        np.zeros(n_labels),
    )


def mlp_forward(m: MlpParams, x):
    """sigmoid(w2 sigmoid(w1 x + b1) + b2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.dim:
        raise ShapeError(f"expected inputs of dimension {m.dim}, got {x.shape}")
    return _sigmoid(_sigmoid(x @ m.w1.T + m.b1) @ m.w2.T + m.b2)


def mlp_loss(m: MlpParams, x, y):
    """Mean over examples and labels of the binary cross-entropy."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    z = _sigmoid(x @ m.w1.T + m.b1) @ m.w2.T + m.b2
    # log(1 + e^z) - y z, evaluated stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def mlp_gradients(m: MlpParams, x, y) -> MlpParams:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    n, l = y.shape
    if n == 0:
        raise UsageError("mlp_gradients needs a nonempty batch")
    h = _sigmoid(x @ m.w1.T + m.b1)
    out = _sigmoid(h @ m.w2.T + m.b2)
    d_z = (out - y) / (n * l)
    d_h = (d_z @ m.w2) * h * (1.0 - h)
    return MlpParams.unchecked(d_h.T @ x, d_h.sum(axis=0), d_z.T @ h, d_z.sum(axis=0))


def _check_binary(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise UsageError("labels must be binary {0, 1}")
    return y


def mlp_train(x, y, cfg: TrainConfig, n_hidden=32, init: MlpParams | None = None, progress=None):
    """Cross-entropy MLP by mini-batch SGD; corruption settings are ignored."""
    x = np.asarray(x, dtype=np.float64)
    y = _check_binary(y)
    if init is None:
        init = init_mlp(x.shape[1], n_hidden, y.shape[1], cfg.seed)

    def batch_grads(p, idx, rng):
        return mlp_gradients(p, x[idx], y[idx])

    return _fit(init, x.shape[0], cfg, batch_grads, lambda p: mlp_loss(p, x, y), None, progress)


@dataclass(frozen=True)
class LabelOptConfig:
    step: float = 0.003
    tol: float = 1e-6
    max_iter: int = 100
    variant: str = "gae_y2"
    ascend: bool = True
    train_noise_std: float = 0.1

    def __post_init__(self):
        for name in ("step", "tol", "train_noise_std"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"{name} must be finite")
        if self.step < 0 or self.tol <= 0 or self.train_noise_std < 0:
            raise UsageError("step must be >= 0, tol > 0 and train_noise_std >= 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise UsageError("max_iter must be a non-negative integer")
        if self.variant not in VARIANTS:
            raise UsageError(f"variant must be one of {VARIANTS}")


def refine_batch(g: GaeParams, x, y0, cfg: LabelOptConfig):
    """Refine each row of ``y0`` independently.

    Every iteration takes one clipped gradient step per active row.  A row
    whose step moves the energy the wrong way retries with half its own
    step size, up to ``MAX_HALVINGS`` times; if all fail the row stays put
    and is marked converged.  Rows stop once |E_{t+1} - E_t| <= tol.
    Returns ``(y, trace)``; ``trace[i]`` lists the accepted energies of row i.
    """
    y = np.clip(np.atleast_2d(np.array(y0, dtype=np.float64)), 0.0, 1.0)
    n = y.shape[0]
    x = np.atleast_2d(np.asarray(x, dtype=np.float64)) if x is not None else None
    if cfg.variant == "gae_xy":
        if x is None or x.shape[0] != n:
            raise ShapeError("gae_xy refinement needs one input row per label row")
    sign = 1.0 if cfg.ascend else -1.0

    def energy_at(idx, yy):
        # overflow shows up as a non-finite energy, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.variant == "gae_y2":
                return np.atleast_1d(energy_covariance(g, yy))
            return np.atleast_1d(energy_conditional(g, x[idx], yy))

    def grad_at(idx, yy):
        if cfg.variant == "gae_y2":
            return np.atleast_2d(energy_covariance_grad(g, yy))
        return np.atleast_2d(vector_field(g, x[idx], yy))

    e = energy_at(np.arange(n), y)
    if not np.all(np.isfinite(e)):
        raise DivergenceError("non-finite initial energy", trace=[[v] for v in e])
    trace = [[float(v)] for v in e]
    lam = np.full(n, float(cfg.step))
    active = np.ones(n, dtype=bool)

    for _ in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        d = sign * grad_at(idx, y[idx])
        e_old = e[idx]
        pending = np.arange(idx.size)
        new_y = y[idx].copy()
        new_e = e_old.copy()
        for _ in range(MAX_HALVINGS + 1):
            rows = idx[pending]
            cand = np.clip(y[rows] + lam[rows, None] * d[pending], 0.0, 1.0)
            ce = energy_at(rows, cand)
            if not np.all(np.isfinite(ce)):
                raise DivergenceError("non-finite energy during refinement", trace=trace)
            ok = sign * (ce - e_old[pending]) >= 0
            new_y[pending[ok]] = cand[ok]
            new_e[pending[ok]] = ce[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            lam[idx[pending]] *= 0.5
        y[idx] = new_y
        e[idx] = new_e
        for j, i in enumerate(idx):
            trace[i].append(float(new_e[j]))
        done = np.abs(new_e - e_old) <= cfg.tol
        active[idx[done]] = False
    return y, trace


def refine_labels(g: GaeParams, x, y0, cfg: LabelOptConfig):
    """Single-example refinement; returns ``(y, energy_trace)``."""
    y0 = np.asarray(y0, dtype=np.float64)
    if y0.ndim != 1:
        raise ShapeError("refine_labels takes a single label vector; use refine_batch")
    xx = None if x is None else np.asarray(x, dtype=np.float64)[None, :]
    y, trace = refine_batch(g, xx, y0[None, :], cfg)
    return y[0], trace[0]


def multilabel_error(pred, truth) -> float:
    """Mean per-entry disagreement after thresholding at 0.5 (0.5 -> 1)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise UsageError("empty prediction")
    return float(np.mean((pred >= 0.5) != (truth >= 0.5)))


def train_label_gae(x, y, variant, cfg: TrainConfig, n_factors=32, n_hidden=32,
                    noise_std=0.1, activation="sigmoid"):
    """Fit the refinement model.

    ``gae_xy``: conditional GAE on (x, y) with Gaussian noise of std
    ``noise_std`` on the y input only.  ``gae_y2``: covariance
    auto-encoder on the labels, trained without corruption.
    """
    y = _check_binary(y)
    if variant == "gae_y2":
        init = init_gae(y.shape[1], y.shape[1], n_factors, n_hidden, activation, cfg.seed, tie_factors=True)
        c = cfg.replace(mode="symmetric", corruption_kind="none", corruption_level=0.0)
        return train_gae(y, None, c, init)
    if variant != "gae_xy":
        raise UsageError(f"variant must be one of {VARIANTS}")
    x = np.asarray(x, dtype=np.float64)
    init = init_gae(x.shape[1], y.shape[1], n_factors, n_hidden, activation, cfg.seed)
    c = cfg.replace(
        mode="conditional",
        corruption_kind="gaussian" if noise_std > 0 else "none",
        corruption_level=noise_std,
        corrupt_x=False,
        corrupt_y=True,
    )
    return train_gae(x, y, c, init)


def write_predictions(pred, fh):
    """One line per example: space-separated refined probabilities."""
    for row in np.atleast_2d(pred):
        fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
