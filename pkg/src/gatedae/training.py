"""Mini-batch SGD with momentum, weight decay and denoising corruption."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, UsageError
from .gae import (
    GaeParams,
    MeanAeParams,
    loss_gradients,
    mean_loss_gradients,
    mean_reconstruction_loss,
    reconstruction_loss,
)

CORRUPTION_KINDS = ("masking", "gaussian", "none")
# Names of parameter arrays that weight decay applies to.
DECAYED = {"wx", "wy", "wh", "w", "w1", "w2"}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    corruption_level: float = 0.0
    corruption_kind: str = "masking"
    batch_size: int = 100
    epochs: int = 50
    seed: int = 0
    mode: str = "symmetric"
    # Which encoder inputs of a conditional/symmetric GAE get corrupted.
    corrupt_x: bool = True
    corrupt_y: bool = True

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "weight_decay", "corruption_level"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"{name} must be finite")
        if self.learning_rate < 0:
            raise UsageError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise UsageError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise UsageError("weight_decay must be >= 0")
        if self.corruption_kind not in CORRUPTION_KINDS:
            raise UsageError(f"corruption_kind must be one of {CORRUPTION_KINDS}")
        if self.corruption_kind == "masking" and not 0.0 <= self.corruption_level <= 1.0:
            raise UsageError("masking level must lie in [0, 1]")
        if self.corruption_level < 0:
            raise UsageError("corruption_level must be >= 0")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise UsageError("batch_size must be a positive integer")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise UsageError("epochs must be a positive integer")
        if self.mode not in ("conditional", "symmetric"):
            raise UsageError("mode must be 'conditional' or 'symmetric'")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    initial_loss: float = float("nan")
    params: object = None


def corrupt(batch, level, kind, rng):
    """Return a corrupted copy of ``batch``.

    ``masking`` zeroes each entry with probability ``level``; ``gaussian``
    adds N(0, level^2) noise; ``none`` (or level 0) returns the batch as is.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if kind not in CORRUPTION_KINDS:
        raise UsageError(f"unknown corruption kind {kind!r}")
    if not math.isfinite(level) or level < 0:
        raise UsageError(f"invalid corruption level {level}")
    if kind == "none" or level == 0:
        return batch.copy()
    if kind == "masking":
        if level > 1:
            raise UsageError("masking level must lie in [0, 1]")
        return batch * (rng.random(batch.shape) >= level)
    return batch + rng.normal(0.0, level, size=batch.shape)


def batch_rng(seed, epoch, batch_index):
    """Generator for one mini-batch; depends only on (seed, epoch, batch)."""
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, epoch, batch_index])


def sgd_step(params, grads, velocity, cfg: TrainConfig):
    """In-place momentum update: v <- mu v - lr (g + wd w); w <- w + v."""
    for name in params.ARRAYS:
        w = getattr(params, name)
        g = getattr(grads, name)
        if cfg.weight_decay and name in DECAYED:
            g = g + cfg.weight_decay * w
        v = velocity[name]
        v *= cfg.momentum
        v -= cfg.learning_rate * g
        w += v


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _fit(params, n, cfg, batch_grads, eval_loss, val_loss, progress, after_step=None):
    if n == 0:
        raise UsageError("cannot train on an empty dataset")
    params = params.copy()
    velocity = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    report = TrainReport(initial_loss=eval_loss(params))
    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        _epochs(params, n, cfg, batch_grads, eval_loss, val_loss, progress, after_step, velocity, report, t0)
    report.params = params
    return params, report


def _epochs(params, n, cfg, batch_grads, eval_loss, val_loss, progress, after_step, velocity, report, t0):
    for epoch in range(cfg.epochs):
        order_rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, epoch])
        for bi, idx in enumerate(_minibatches(n, cfg.batch_size, order_rng)):
            grads = batch_grads(params, idx, batch_rng(cfg.seed, epoch, bi + 1))
            sgd_step(params, grads, velocity, cfg)
            if after_step is not None:
                after_step(params, velocity)
        loss = eval_loss(params) if all(
            np.all(np.isfinite(v)) for v in params.arrays().values()
        ) else float("nan")
        vloss = val_loss(params) if val_loss is not None and math.isfinite(loss) else float("nan")
        report.train_loss.append(loss)
        report.val_loss.append(vloss)
        report.wall_time.append(time.perf_counter() - t0)
        if progress is not None:
            print(f"epoch={epoch + 1} train_loss={loss:.10g} val_loss={vloss:.10g}", file=progress)
        if not math.isfinite(loss):
            raise DivergenceError(f"training diverged at epoch {epoch + 1}", epoch=epoch + 1, trace=report)


def _eval_in_chunks(fn, n, chunk=4096):
    total = 0.0
    for s in range(0, n, chunk):
        idx = slice(s, min(n, s + chunk))
        total += fn(idx) * (idx.stop - idx.start)
    return total / n


def train_gae(x, y, cfg: TrainConfig, init: GaeParams, validation=None, progress=None):
    """Train a gated auto-encoder on pairs (x[i], y[i]).

    With ``y=None`` the model is a covariance auto-encoder: both inputs are
    the same (identically corrupted) vector and the factor matrices stay
    tied, the shared matrix receiving the sum of both roles' gradients.
    Targets are always the clean data.  Returns ``(params, report)``.
    """
    x = np.asarray(x, dtype=np.float64)
    tied = y is None
    y = x if tied else np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise UsageError("x and y must have the same number of rows")
    if tied and not init.factors_tied:
        raise UsageError("covariance training needs an initialization with wx == wy")
    mode = cfg.mode

    def batch_grads(p, idx, rng):
        xb, yb = x[idx], y[idx]
        if tied:
            xc = corrupt(xb, cfg.corruption_level, cfg.corruption_kind, rng)
            yc = xc
        else:
            xc = corrupt(xb, cfg.corruption_level, cfg.corruption_kind, rng) if cfg.corrupt_x else xb
            yc = corrupt(yb, cfg.corruption_level, cfg.corruption_kind, rng) if cfg.corrupt_y else yb
        g = loss_gradients(p, xc, yc, mode, target_x=xb, target_y=yb)
        if tied:
            shared = g.wx + g.wy
            g.wx, g.wy = shared, shared
            bias = g.ax + g.ay
            g.ax, g.ay = bias, bias
        return g

    def after_step(p, velocity):
        if tied:
            # identical updates keep the copies equal; re-alias to be exact
            p.wy = p.wx.copy()
            p.ay = p.ax.copy()

    def eval_loss(p, xs=x, ys=y):
        return _eval_in_chunks(lambda s: reconstruction_loss(p, xs[s], ys[s], mode), xs.shape[0])

    val = None
    if validation is not None:
        vx, vy = validation
        vx = np.asarray(vx, dtype=np.float64)
        vy = vx if vy is None else np.asarray(vy, dtype=np.float64)
        val = lambda p: eval_loss(p, vx, vy)  # noqa: E731
    return _fit(init, x.shape[0], cfg, batch_grads, eval_loss, val, progress, after_step)


def train_mean_ae(x, cfg: TrainConfig, init: MeanAeParams, validation=None, progress=None):
    """Train a classical tied-weight auto-encoder (denoising when corrupted)."""
    x = np.asarray(x, dtype=np.float64)

    def batch_grads(p, idx, rng):
        xb = x[idx]
        xc = corrupt(xb, cfg.corruption_level, cfg.corruption_kind, rng)
        return mean_loss_gradients(p, xc, target=xb)

    def eval_loss(p, xs=x):
        return _eval_in_chunks(lambda s: mean_reconstruction_loss(p, xs[s]), xs.shape[0])

    val = None
    if validation is not None:
        vx = np.asarray(validation, dtype=np.float64)
        val = lambda p: eval_loss(p, vx)  # noqa: E731
    return _fit(init, x.shape[0], cfg, batch_grads, eval_loss, val, progress)


def grid_search(train_fn, grid: dict, base: TrainConfig):
    """Run ``train_fn(cfg) -> (params, report)`` over the Cartesian ``grid``.

    Picks the configuration with the lowest final validation loss.
    Returns ``(best_cfg, best_params, results)`` with ``results`` a list of
    ``(cfg, final_val_loss)``.
    """
    keys = sorted(grid)
    results = []
    best = None
    for values in itertools.product(*(grid[k] for k in keys)):
        cfg = base.replace(**dict(zip(keys, values)))
        try:
            params, report = train_fn(cfg)
        except DivergenceError:
            results.append((cfg, float("inf")))
            continue
        score = report.val_loss[-1] if report.val_loss else float("nan")
        if not math.isfinite(score):
            score = float("inf")
        results.append((cfg, score))
        if best is None or score < best[0]:
            best = (score, cfg, params)
    if best is None:
        raise DivergenceError("every grid configuration diverged")
    return best[1], best[2], results
