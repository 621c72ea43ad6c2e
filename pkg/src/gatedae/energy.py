"""Scoring functions obtained by integrating the reconstruction vector field.

Higher energy means the model likes the input more.  Every energy is only
defined up to an additive constant per model; the constant is fixed to 0
here and absorbed later by class calibration biases.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, ShapeError, UsageError
from .gae import (
    Activation,
    GaeParams,
    MeanAeParams,
    _rows,
    decode_x,
    decode_y,
    encode,
)

__all__ = [
    "StackedPair",
    "stack_pair",
    "softplus",
    "antiderivative",
    "vector_field",
    "vector_field_x",
    "stacked_vector_field",
    "poincare_residual",
    "energy_conditional",
    "energy_symmetric",
    "energy_covariance",
    "energy_covariance_grad",
    "energy_mean",
    "energy_mean_covariance",
]


def softplus(u):
    """log(1 + exp(u)) without overflow."""
    u = np.asarray(u, dtype=float)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def antiderivative(kind, u):
    """Sum over the last axis of H(u_k), where H' is the activation."""
    kind = Activation.parse(kind)
    u = np.asarray(u, dtype=float)
    if kind is Activation.SIGMOID:
        vals = softplus(u)
    elif kind is Activation.TANH:
        # log cosh(u) = |u| + log1p(exp(-2|u|)) - log 2
        a = np.abs(u)
        vals = a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)
    elif kind is Activation.LINEAR:
        vals = 0.5 * u * u
    elif kind is Activation.RELU:
        vals = 0.5 * np.where(u > 0, u * u, 0.0)
    else:  # pragma: no cover - Activation.parse already rejects these
        raise CapabilityError(f"no anti-derivative for {kind}")
    return vals.sum(axis=-1)


def _scalar(v, single):
    return float(v[0]) if single else v


class StackedPair(NamedTuple):
    xi: np.ndarray  # [y; x]
    gamma: np.ndarray  # [x; y]


def stack_pair(x, y) -> StackedPair:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return StackedPair(np.concatenate([y, x], axis=-1), np.concatenate([x, y], axis=-1))


def vector_field(p: GaeParams, x, y, decoder: GaeParams | None = None):
    """r(y|x) - y.

    ``decoder`` substitutes a different parameter copy for the decoding
    pass.  It exists only as a hook for negative-control tests; any
    ``decoder`` other than ``p`` breaks the tied-weight structure.
    """
    state = encode(p, x, y)
    return decode_y(p if decoder is None else decoder, x, state) - np.asarray(y, dtype=float)


def vector_field_x(p: GaeParams, x, y, decoder: GaeParams | None = None):
    """r(x|y) - x."""
    state = encode(p, x, y)
    return decode_x(p if decoder is None else decoder, y, state) - np.asarray(x, dtype=float)


def stacked_vector_field(p: GaeParams, x, y):
    """[r(y|x) - y; r(x|y) - x], the field of the symmetric model."""
    state = encode(p, x, y)
    fy = decode_y(p, x, state) - np.asarray(y, dtype=float)
    fx = decode_x(p, y, state) - np.asarray(x, dtype=float)
    return np.concatenate([fy, fx], axis=-1)


def _jacobian(func, v, step):
    v = np.asarray(v, dtype=float)
    cols = []
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = step
        cols.append((func(v + e) - func(v - e)) / (2.0 * step))
    return np.stack(cols, axis=1)


def poincare_residual(p: GaeParams, x, y, wrt="y", step=1e-5, decoder=None) -> float:
    """max |J_ij - J_ji| of the field's Jacobian, by central differences.

    ``wrt="y"`` differentiates r(y|x) - y in y; ``wrt="x"`` differentiates
    r(x|y) - x in x.  Zero (up to truncation error) iff the field is locally
    a gradient.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ShapeError("poincare_residual works on single vectors")
    if wrt == "y":
        jac = _jacobian(lambda v: vector_field(p, x, v, decoder), y, step)
    elif wrt == "x":
        jac = _jacobian(lambda v: vector_field_x(p, v, y, decoder), x, step)
    else:
        raise UsageError(f"wrt must be 'x' or 'y', got {wrt!r}")
    return float(np.max(np.abs(jac - jac.T)))


def energy_conditional(p: GaeParams, x, y):
    """E(y|x) = sum_k H(u_k) + ay.y - ||y||^2 / 2; its y-gradient is r(y|x) - y."""
    x2, _ = _rows(x, p.dx, "x")
    y2, single = _rows(y, p.dy, "y")
    u = encode(p, x2, y2).u
    e =antiderivative(p.activation, u) + y2 @ p.ay - 0.5 * np.sum(y2 * y2, axis=1)
    return _scalar(e, single)


def energy_symmetric(p: GaeParams, x, y):
    """Energy of the symmetric model over the stacked input xi = [y; x].

    Uses block-diagonal factor matrices so that the factor products of the
    stacked pair are ``[(wy y)*(wx x); (wx x)*(wy y)]``; the mapping units
    pool both halves with ``wh / 2`` which gives the same ``u`` as
    :func:`gatedae.gae.encode`.  Its gradient in xi is the stacked field.
    """
    x2, single = _rows(x, p.dx, "x")
    y2, _ = _rows(y, p.dy, "y")
    if x2.shape[0] != y2.shape[0]:
        raise ShapeError("x and y batch sizes differ")
    xi, gamma = stack_pair(x2, y2)
    f, dx, dy = p.n_factors, p.dx, p.dy
    w_xi = np.zeros((2 * f, dy + dx))
    w_xi[:f, :dy] = p.wy
    w_xi[f:, dy:] = p.wx
    w_gamma = np.zeros((2 * f, dx + dy))
    w_gamma[:f, :dx] = p.wx
    w_gamma[f:, dx:] = p.wy
    pool = 0.5 * np.concatenate([p.wh, p.wh], axis=1)
    u = ((xi @ w_xi.T) * (gamma @ w_gamma.T)) @ pool.T + p.b
    bias = np.concatenate([p.ay, p.ax])
    e = antiderivative(p.activation, u) + xi @ bias - 0.5 * np.sum(xi * xi, axis=1)
    return _scalar(e, single)


def _require_covariance(p: GaeParams):
    if p.dx != p.dy or not p.factors_tied:
        raise UsageError("covariance energy needs dx == dy and wx == wy (shared factor matrix)")


def energy_covariance(p: GaeParams, x):
    """sum_k H((wh (wf x)^2 + b)_k) + ax.x - ||x||^2 for a covariance AE.

    The quadratic term is not halved: both reconstruction directions of the
    tied-input model contribute.
    """
    _require_covariance(p)
    x2, single = _rows(x, p.dx, "x")
    u = (x2 @ p.wx.T) ** 2 @ p.wh.T + p.b
    e = antiderivative(p.activation, u) + x2 @ p.ax - np.sum(x2 * x2, axis=1)
    return _scalar(e, single)


def energy_covariance_grad(p: GaeParams, x):
    """Analytic x-gradient of :func:`energy_covariance`."""
    _require_covariance(p)
    x2, single = _rows(x, p.dx, "x")
    fx = x2 @ p.wx.T
    h = p.activation(fx**2 @ p.wh.T + p.b)
    g = 2.0 * (fx * (h @ p.wh)) @ p.wx + p.ax - 2.0 * x2
    return g[0] if single else g


def energy_mean(m: MeanAeParams, x):
    """Energy of a classical tied auto-encoder with sigmoid hiddens."""
    x2, single = _rows(x, m.dim, "x")
    e = softplus(x2 @ m.w.T + m.c).sum(axis=1) + x2 @ m.a - 0.5 * np.sum(x2 * x2, axis=1)
    return _scalar(e, single)


def energy_mean_covariance(m: MeanAeParams, c: GaeParams, x):
    if m.dim != c.dx:
        raise ShapeError(f"mean AE dim {m.dim} != covariance AE dim {c.dx}")
    return energy_mean(m, x) + energy_covariance(c, x)
