"""Shared builders and a finite-difference helper for the test-suite."""

import numpy as np

from gatedae.gae import GaeParams


def example_params(activation="sigmoid"):
    """The 1-factor, 1-unit model used by the hand-worked examples."""
    return GaeParams(
        wx=[[1.0, 0.0]], wy=[[0.0, 1.0]], wh=[[1.0]], b=[0.0], ax=[0.0, 0.0], ay=[0.0, 0.0],
        activation=activation,
    )


def random_params(rng, dx=3, dy=3, f=2, m=2, activation="sigmoid", tied=False):
    wx = rng.normal(size=(f, dx))
    wy = wx.copy() if tied else rng.normal(size=(f, dy))
    ax = rng.normal(size=dx) * 0.5
    return GaeParams(
        wx, wy, rng.normal(size=(m, f)), rng.normal(size=m) * 0.5,
        ax, ax.copy() if tied else rng.normal(size=dy) * 0.5, activation,
    )


def central_diff(fn, v, step=1e-5):
    v = np.asarray(v, dtype=float)
    g = np.zeros_like(v)
    for idx in np.ndindex(v.shape):
        e = np.zeros_like(v)
        e[idx] = step
        g[idx] = (fn(v + e) - fn(v - e)) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8))
