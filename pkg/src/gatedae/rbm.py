"""Free energies of Gaussian-Bernoulli RBMs, used as independent oracles.

Nothing here reuses the scoring code in :mod:`gatedae.energy`; every closed
form is paired with a brute-force evaluator that enumerates the hidden
states, so both routes can be checked against each other.  Visible
variances are fixed to 1 (standardized data).

Returned values are ``-F``, the log of the unnormalized marginal
probability, so that larger is better, as for the auto-encoder energies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ShapeError, UsageError
from .gae import GaeParams, MeanAeParams

MAX_ENUMERATED_HIDDEN = 16


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _vec(v, n, name):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {v.shape}")
    return v


def _hidden_states(m):
    if m > MAX_ENUMERATED_HIDDEN:
        raise UsageError(f"refusing to enumerate 2^{m} hidden states")
    return np.array(list(itertools.product((0.0, 1.0), repeat=m))).reshape(-1, m)


@dataclass
class FcrbmParams:
    """Factored gated conditional RBM modelling x given y.

    ``wx``: F x Dx, ``wy``: F x Dy, ``wh``: F x M, ``a``: Dx, ``b``: M.
    """

    wx: np.ndarray
    wy: np.ndarray
    wh: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.wx, self.wy, self.wh, self.a, self.b = (
            np.asarray(v, dtype=np.float64) for v in (self.wx, self.wy, self.wh, self.a, self.b)
        )
        f = self.wx.shape[0]
        if self.wy.shape[0] != f or self.wh.shape[0] != f:
            raise ShapeError("factor dimension mismatch")
        _vec(self.a, self.wx.shape[1], "a")
        _vec(self.b, self.wh.shape[1], "b")


@dataclass
class CovRbmParams:
    """Covariance RBM: ``p_mat``: F x M, ``c_mat``: F x D, ``a``: D, ``b``: M."""

    p_mat: np.ndarray
    c_mat: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.p_mat, self.c_mat, self.a, self.b = (
            np.asarray(v, dtype=np.float64) for v in (self.p_mat, self.c_mat, self.a, self.b)
        )
        if self.p_mat.shape[0] != self.c_mat.shape[0]:
            raise ShapeError("factor dimension mismatch")
        _vec(self.a, self.c_mat.shape[1], "a")
        _vec(self.b, self.p_mat.shape[1], "b")


@dataclass
class GaussianRbmParams:
    """Classical (mean) Gaussian-Bernoulli RBM: ``w``: M x D, ``c``: M, ``a``: D."""

    w: np.ndarray
    c: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.w, self.c, self.a = (np.asarray(v, dtype=np.float64) for v in (self.w, self.c, self.a))
        _vec(self.c, self.w.shape[0], "c")
        _vec(self.a, self.w.shape[1], "a")


# -- factored conditional RBM ------------------------------------------------


def fcrbm_energy(q: FcrbmParams, x, h, y):
    """E(x, h | y) = ||a - x||^2 / 2 - b.h - sum_f (wx x)_f (wy y)_f (wh h)_f."""
    x = _vec(x, q.wx.shape[1], "x")
    y = _vec(y, q.wy.shape[1], "y")
    h = np.atleast_2d(h)
    gate = (q.wx @ x) * (q.wy @ y)
    return 0.5 * np.sum((q.a - x) ** 2) - h @ q.b - (h @ q.wh.T) @ gate


def fcrbm_free_energy(q: FcrbmParams, x, y) -> float:
    x = _vec(x, q.wx.shape[1], "x")
    y = _vec(y, q.wy.shape[1], "y")
    gate = (q.wx @ x) * (q.wy @ y)
    hidden = _log1pexp(q.b + q.wh.T @ gate).sum()
    return float(hidden + q.a @ x - 0.5 * x @ x - 0.5 * q.a @ q.a)


def fcrbm_free_energy_bruteforce(q: FcrbmParams, x, y) -> float:
    hs = _hidden_states(q.wh.shape[1])
    return float(logsumexp(-fcrbm_energy(q, x, hs, y)))


def fcrbm_from_gae(p: GaeParams) -> FcrbmParams:
    """FCRBM whose visible units are the GAE's reconstructed input y.

    The GAE conditions on x and reconstructs y, so the roles of the factor
    matrices swap and the pooling matrix is transposed.
    """
    return FcrbmParams(wx=p.wy.copy(), wy=p.wx.copy(), wh=p.wh.T.copy(), a=p.ay.copy(), b=p.b.copy())


def gae_from_fcrbm(q: FcrbmParams, ax=None, activation="sigmoid") -> GaeParams:
    ax = np.zeros(q.wy.shape[1]) if ax is None else ax
    return GaeParams(q.wy.copy(), q.wx.copy(), q.wh.T.copy(), q.b.copy(), ax, q.a.copy(), activation)


# -- covariance RBM ------------------------------------------------------------


def covrbm_energy(q: CovRbmParams, x, h):
    """E(x, h) = ||a - x||^2 - sum_f (P h)_f (C x)_f^2 - b.h."""
    x = _vec(x, q.c_mat.shape[1], "x")
    h = np.atleast_2d(h)
    sq = (q.c_mat @ x) ** 2
    return np.sum((q.a - x) ** 2) - (h @ q.p_mat.T) @ sq - h @ q.b


def covrbm_free_energy(q: CovRbmParams, x) -> float:
    x = _vec(x, q.c_mat.shape[1], "x")
    sq = (q.c_mat @ x) ** 2
    hidden = _log1pexp(q.b + q.p_mat.T @ sq).sum()
    return float(hidden - np.sum((x - q.a) ** 2))


def covrbm_free_energy_bruteforce(q: CovRbmParams, x) -> float:
    hs = _hidden_states(q.p_mat.shape[1])
    return float(logsumexp(-covrbm_energy(q, x, hs)))


def covrbm_from_cae(p: GaeParams) -> CovRbmParams:
    """P = wh^T, C = wf.  The visible bias is halved because the RBM's
    quadratic term is not halved: ||x - a||^2 expands to 2 a.x."""
    if not p.factors_tied:
        raise UsageError("covariance auto-encoder needs wx == wy")
    return CovRbmParams(p_mat=p.wh.T.copy(), c_mat=p.wx.copy(), a=0.5 * p.ax, b=p.b.copy())


def cae_from_covrbm(q: CovRbmParams, activation="sigmoid") -> GaeParams:
    wf = q.c_mat.copy()
    return GaeParams(wf, wf.copy(), q.p_mat.T.copy(), q.b.copy(), 2.0 * q.a, 2.0 * q.a, activation)


# -- mean and mean-covariance RBM ------------------------------------------------


def gaussian_rbm_energy(q: GaussianRbmParams, x, h):
    """E(x, h) = ||x - a||^2 / 2 - c.h - h.(W x)."""
    x = _vec(x, q.w.shape[1], "x")
    h = np.atleast_2d(h)
    return 0.5 * np.sum((x - q.a) ** 2) - h @ q.c - h @ (q.w @ x)


def gaussian_rbm_free_energy(q: GaussianRbmParams, x) -> float:
    x = _vec(x, q.w.shape[1], "x")
    return float(_log1pexp(q.w @ x + q.c).sum() + q.a @ x - 0.5 * x @ x - 0.5 * q.a @ q.a)


def gaussian_rbm_free_energy_bruteforce(q: GaussianRbmParams, x) -> float:
    hs = _hidden_states(q.w.shape[0])
    return float(logsumexp(-gaussian_rbm_energy(q, x, hs)))


def gaussian_rbm_from_mean_ae(m: MeanAeParams) -> GaussianRbmParams:
    return GaussianRbmParams(m.w.copy(), m.c.copy(), m.a.copy())


def mean_ae_from_gaussian_rbm(q: GaussianRbmParams) -> MeanAeParams:
    return MeanAeParams(q.w.copy(), q.c.copy(), q.a.copy())


def mcrbm_free_energy(mean: GaussianRbmParams, cov: CovRbmParams, x) -> float:
    """Free energy of the mean-covariance RBM: the two parts simply add."""
    if mean.w.shape[1] != cov.c_mat.shape[1]:
        raise ShapeError("mean and covariance parts see different visible sizes")
    return gaussian_rbm_free_energy(mean, x) + covrbm_free_energy(cov, x)


def mcrbm_free_energy_bruteforce(mean: GaussianRbmParams, cov: CovRbmParams, x) -> float:
    """Enumerates the joint hidden layer [h_mean; h_cov] of the mcRBM."""
    mm = mean.w.shape[0]
    hs = _hidden_states(mm + cov.p_mat.shape[1])
    joint = gaussian_rbm_energy(mean, x, hs[:, :mm]) + covrbm_energy(cov, x, hs[:, mm:])
    return float(logsumexp(-joint))
