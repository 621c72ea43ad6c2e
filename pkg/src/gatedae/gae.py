"""Gated auto-encoder: parameters, forward passes, objectives and gradients.

All routines accept either single vectors or row-stacked batches (one
example per row) and return results of the matching rank.  Weights are tied:
the same ``wx``, ``wy`` and ``wh`` arrays drive the encoder and both decoders.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, InputError, ShapeError, UsageError

__all__ = [
    "Activation",
    "GaeParams",
    "MeanAeParams",
    "MappingState",
    "init_gae",
    "init_mean_ae",
    "encode",
    "decode_y",
    "decode_x",
    "reconstruction_loss",
    "loss_gradients",
    "mean_encode",
    "mean_decode",
    "mean_reconstruction_loss",
    "mean_loss_gradients",
]

_UNSUPPORTED = {"softmax", "modulus", "square", "squaring"}


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    LINEAR = "linear"
    RELU = "relu"

    @classmethod
    def parse(cls, kind) -> "Activation":
        if isinstance(kind, Activation):
            return kind
        name = str(kind).lower()
        if name in _UNSUPPORTED:
            raise CapabilityError(f"activation {name!r} has no implemented anti-derivative")
        try:
            return cls(name)
        except ValueError:
            raise CapabilityError(f"unknown activation {kind!r}") from None

    def __call__(self, u):
        if self is Activation.SIGMOID:
            return _sigmoid(u)
        if self is Activation.TANH:
            return np.tanh(u)
        if self is Activation.LINEAR:
            return np.array(u, dtype=float, copy=True)
        return np.maximum(u, 0.0)

    def derivative(self, u, h):
        """dh/du given pre-activation ``u`` and activation ``h``."""
        if self is Activation.SIGMOID:
            return h * (1.0 - h)
        if self is Activation.TANH:
            return 1.0 - h * h
        if self is Activation.LINEAR:
            return np.ones_like(u)
        return (u > 0).astype(float)


def _sigmoid(u):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class GaeParams:
    """Factored GAE weights.

    ``wx``: F x Dx, ``wy``: F x Dy, ``wh``: M x F, ``b``: M,
    ``ax``: Dx (output bias of the x-reconstruction), ``ay``: Dy.
    """

    wx: np.ndarray
    wy: np.ndarray
    wh: np.ndarray
    b: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    activation: Activation = Activation.SIGMOID

    ARRAYS = ("wx", "wy", "wh", "b", "ax", "ay")

    def __post_init__(self):
        for name in self.ARRAYS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.activation = Activation.parse(self.activation)
        self.validate()

    def validate(self):
        wx, wy, wh = self.wx, self.wy, self.wh
        if wx.ndim != 2 or wy.ndim != 2 or wh.ndim != 2:
            raise ShapeError("wx, wy and wh must be matrices")
        f = wx.shape[0]
        if wy.shape[0] != f or wh.shape[1] != f:
            raise ShapeError(
                f"factor count mismatch: wx {wx.shape}, wy {wy.shape}, wh {wh.shape}"
            )
        if self.b.shape != (wh.shape[0],):
            raise ShapeError(f"b must have shape ({wh.shape[0]},), got {self.b.shape}")
        if self.ax.shape != (wx.shape[1],):
            raise ShapeError(f"ax must have shape ({wx.shape[1]},), got {self.ax.shape}")
        if self.ay.shape != (wy.shape[1],):
            raise ShapeError(f"ay must have shape ({wy.shape[1]},), got {self.ay.shape}")
        for name in self.ARRAYS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"non-finite entries in {name}")

    @classmethod
    def unchecked(cls, wx, wy, wh, b, ax, ay, activation):
        """Build without validation (gradient containers may hold inf/nan)."""
        obj = cls.__new__(cls)
        obj.wx, obj.wy, obj.wh, obj.b, obj.ax, obj.ay = wx, wy, wh, b, ax, ay
        obj.activation = Activation.parse(activation)
        return obj

    @property
    def n_factors(self) -> int:
        return self.wx.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.wh.shape[0]

    @property
    def dx(self) -> int:
        return self.wx.shape[1]

    @property
    def dy(self) -> int:
        return self.wy.shape[1]

    @property
    def factors_tied(self) -> bool:
        return self.wx.shape == self.wy.shape and np.array_equal(self.wx, self.wy)

    def arrays(self):
        return {name: getattr(self, name) for name in self.ARRAYS}

    def copy(self) -> "GaeParams":
        return replace(self, **{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> "GaeParams":
        return replace(self, **{k: np.zeros_like(v) for k, v in self.arrays().items()})


@dataclass
class MeanAeParams:
    """Classical tied-weight auto-encoder: sigmoid hiddens, linear output.

    ``w``: M x D, ``c``: M (hidden bias), ``a``: D (output bias).
    """

    w: np.ndarray
    c: np.ndarray
    a: np.ndarray

    ARRAYS = ("w", "c", "a")

    def __post_init__(self):
        for name in self.ARRAYS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.w.ndim != 2:
            raise ShapeError("w must be a matrix")
        if self.c.shape != (self.w.shape[0],) or self.a.shape != (self.w.shape[1],):
            raise ShapeError(
                f"bias shapes {self.c.shape}, {self.a.shape} do not fit w {self.w.shape}"
            )
        for name in self.ARRAYS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"non-finite entries in {name}")

    @classmethod
    def unchecked(cls, w, c, a):
        obj = cls.__new__(cls)
        obj.w, obj.c, obj.a = w, c, a
        return obj

    @property
    def n_hidden(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    def arrays(self):
        return {name: getattr(self, name) for name in self.ARRAYS}

    def copy(self) -> "MeanAeParams":
        return MeanAeParams(**{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> "MeanAeParams":
        return MeanAeParams(**{k: np.zeros_like(v) for k, v in self.arrays().items()})


class MappingState(NamedTuple):
    h: np.ndarray
    u: np.ndarray


def _uniform(rng, rows, cols):
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_gae(dx, dy, n_factors, n_hidden, activation="sigmoid", seed=0, tie_factors=False):
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases.

    With ``tie_factors`` (covariance auto-encoder) ``wy`` starts as a copy of
    ``wx``; this requires ``dx == dy``.
    """
    rng = np.random.default_rng(seed)
    wx = _uniform(rng, n_factors, dx)
    if tie_factors:
        if dx != dy:
            raise UsageError("tied factors need dx == dy")
        wy = wx.copy()
    else:
        wy = _uniform(rng, n_factors, dy)
    wh = _uniform(rng, n_hidden, n_factors)
    return GaeParams(wx, wy, wh, np.zeros(n_hidden), np.zeros(dx), np.zeros(dy), activation)


def init_mean_ae(dim, n_hidden, seed=0):
    rng = np.random.default_rng(seed)
    return MeanAeParams(_uniform(rng, n_hidden, dim), np.zeros(n_hidden), np.zeros(dim))


def _rows(v, dim, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim not in (1, 2) or v.shape[-1] != dim:
        raise ShapeError(f"{name} must have trailing dimension {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"non-finite values in {name}")
    return np.atleast_2d(v), v.ndim == 1


def _match(x2, y2):
    if x2.shape[0] != y2.shape[0]:
        raise ShapeError(f"batch sizes differ: {x2.shape[0]} vs {y2.shape[0]}")


def encode(p: GaeParams, x, y) -> MappingState:
    """Mapping units h = act(wh ((wx x) * (wy y)) + b)."""
    x2, single = _rows(x, p.dx, "x")
    y2, _ = _rows(y, p.dy, "y")
    _match(x2, y2)
    u = ((x2 @ p.wx.T) * (y2 @ p.wy.T)) @ p.wh.T + p.b
    h = p.activation(u)
    if single:
        return MappingState(h[0], u[0])
    return MappingState(h, u)


def _state_rows(h, m):
    hh = h.h if isinstance(h, MappingState) else h
    return _rows(hh, m, "h")[0]


def decode_y(p: GaeParams, x, h) -> np.ndarray:
    """Reconstruction of y given x and the mapping state (linear output)."""
    x2, single = _rows(x, p.dx, "x")
    h2 = _state_rows(h, p.n_hidden)
    _match(x2, h2)
    r = ((x2 @ p.wx.T) * (h2 @ p.wh)) @ p.wy + p.ay
    return r[0] if single else r


def decode_x(p: GaeParams, y, h) -> np.ndarray:
    """Reconstruction of x given y and the mapping state (linear output)."""
    y2, single = _rows(y, p.dy, "y")
    h2 = _state_rows(h, p.n_hidden)
    _match(y2, h2)
    r = ((y2 @ p.wy.T) * (h2 @ p.wh)) @ p.wx + p.ax
    return r[0] if single else r


def _check_mode(mode):
    if mode not in ("conditional", "symmetric"):
        raise UsageError(f"mode must be 'conditional' or 'symmetric', got {mode!r}")


def reconstruction_loss(p: GaeParams, x, y, mode="conditional", target_x=None, target_y=None):
    """Squared-error objective, averaged over the batch for 2-D inputs.

    ``conditional``: 0.5 ||r(y|x) - y||^2.  ``symmetric`` adds
    0.5 ||r(x|y) - x||^2, both terms sharing one encoding of (x, y).
    Targets default to the inputs; pass clean targets for denoising.
    """
    _check_mode(mode)
    x2, single = _rows(x, p.dx, "x")
    y2, _ = _rows(y, p.dy, "y")
    _match(x2, y2)
    ty = y2 if target_y is None else _rows(target_y, p.dy, "target_y")[0]
    state = encode(p, x2, y2)
    per = 0.5 * np.sum((decode_y(p, x2, state) - ty) ** 2, axis=1)
    if mode == "symmetric":
        tx = x2 if target_x is None else _rows(target_x, p.dx, "target_x")[0]
        per = per + 0.5 * np.sum((decode_x(p, y2, state) - tx) ** 2, axis=1)
    return float(per[0]) if single else float(per.mean())


def loss_gradients(p: GaeParams, x, y, mode="conditional", target_x=None, target_y=None):
    """Gradient of the mean batch loss with respect to every parameter.

    Returns a ``GaeParams`` holding the gradients.  ``x`` and ``y`` are the
    (possibly corrupted) encoder inputs; ``target_*`` the clean targets.
    """
    _check_mode(mode)
    x2, _ = _rows(x, p.dx, "x")
    y2, _ = _rows(y, p.dy, "y")
    _match(x2, y2)
    n = x2.shape[0]
    if n == 0:
        raise UsageError("loss_gradients needs a nonempty batch")
    ty = y2 if target_y is None else _rows(target_y, p.dy, "target_y")[0]

    fx = x2 @ p.wx.T
    fy = y2 @ p.wy.T
    prod = fx * fy
    u = prod @ p.wh.T + p.b
    h = p.activation(u)
    g = h @ p.wh  # N x F

    g_wx = np.zeros_like(p.wx)
    g_wy = np.zeros_like(p.wy)
    g_ax = np.zeros_like(p.ax)
    d_g = np.zeros_like(g)
    d_fx = np.zeros_like(fx)
    d_fy = np.zeros_like(fy)

    # y-reconstruction: r = wy^T (fx * g) + ay
    ey = (fx * g) @ p.wy + p.ay - ty
    g_ay = ey.sum(axis=0)
    g_wy += (fx * g).T @ ey
    t = ey @ p.wy.T
    d_g += fx * t
    d_fx += g * t

    if mode == "symmetric":
        tx = x2 if target_x is None else _rows(target_x, p.dx, "target_x")[0]
        ex = (fy * g) @ p.wx + p.ax - tx
        g_ax = ex.sum(axis=0)
        g_wx += (fy * g).T @ ex
        t = ex @ p.wx.T
        d_g += fy * t
        d_fy += g * t

    g_wh = h.T @ d_g
    d_u = (d_g @ p.wh.T) * p.activation.derivative(u, h)
    g_b = d_u.sum(axis=0)
    g_wh += d_u.T @ prod
    d_prod = d_u @ p.wh
    d_fx += d_prod * fy
    d_fy += d_prod * fx
    g_wx += d_fx.T @ x2
    g_wy += d_fy.T @ y2

    inv = 1.0 / n
    return GaeParams.unchecked(
        g_wx * inv, g_wy * inv, g_wh * inv, g_b * inv, g_ax * inv, g_ay * inv, p.activation
    )


def mean_encode(m: MeanAeParams, x) -> MappingState:
    x2, single = _rows(x, m.dim, "x")
    u = x2 @ m.w.T + m.c
    h = _sigmoid(u)
    return MappingState(h[0], u[0]) if single else MappingState(h, u)


def mean_decode(m: MeanAeParams, h) -> np.ndarray:
    hh = h.h if isinstance(h, MappingState) else h
    h2, single = _rows(hh, m.n_hidden, "h")
    r = h2 @ m.w + m.a
    return r[0] if single else r


def mean_reconstruction_loss(m: MeanAeParams, x, target=None) -> float:
    x2, single = _rows(x, m.dim, "x")
    t = x2 if target is None else _rows(target, m.dim, "target")[0]
    r = mean_decode(m, mean_encode(m, x2))
    per = 0.5 * np.sum((r - t) ** 2, axis=1)
    return float(per[0]) if single else float(per.mean())


def mean_loss_gradients(m: MeanAeParams, x, target=None) -> MeanAeParams:
    x2, _ = _rows(x, m.dim, "x")
    n = x2.shape[0]
    if n == 0:
        raise UsageError("mean_loss_gradients needs a nonempty batch")
    t = x2 if target is None else _rows(target, m.dim, "target")[0]
    h = _sigmoid(x2 @ m.w.T + m.c)
    e = h @ m.w + m.a - t
    d_u = (e @ m.w.T) * h * (1.0 - h)
    g_w = h.T @ e + d_u.T @ x2
    return MeanAeParams.unchecked(g_w / n, d_u.sum(axis=0) / n, e.sum(axis=0) / n)

