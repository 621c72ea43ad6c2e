"""Self-contained numerical checks of the energy identities.

Each suite builds seeded random models, measures a worst-case residual and
compares it with a fixed tolerance.  :func:`run_all` drives every suite and
is what ``gatedae verify`` prints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import (
    energy_conditional,
    energy_covariance,
    energy_mean_covariance,
    poincare_residual,
    vector_field,
)
from .gae import Activation, GaeParams, MeanAeParams
from .rbm import (
    covrbm_free_energy,
    covrbm_free_energy_bruteforce,
    covrbm_from_cae,
    fcrbm_free_energy,
    fcrbm_free_energy_bruteforce,
    fcrbm_from_gae,
    gaussian_rbm_free_energy,
    gaussian_rbm_free_energy_bruteforce,
    gaussian_rbm_from_mean_ae,
    mcrbm_free_energy,
    mcrbm_free_energy_bruteforce,
)

ACTIVATIONS = tuple(Activation)
FD_STEP = 1e-5

TOL_GRADIENT = 1e-5
TOL_POINCARE = 1e-6
CONTROL_MIN = 1e-3
TOL_PATH = 1e-3
TOL_EQUIV = 1e-8
TOL_BRUTE = 1e-10


@dataclass
class SuiteResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    # "max" residuals must stay below the tolerance, "min" ones above it.
    kind: str = "max"

    def line(self):
        op = "<=" if self.kind == "max" else ">"
        status = "PASS" if self.passed else "FAIL"
        return f"suite={self.name} residual={self.residual:.3e} bound={op}{self.tolerance:.0e} status={status}"


def random_gae(rng, dx, dy, n_factors, n_hidden, activation="sigmoid", tied=False, scale=1.0):
    """Random GAE with Gaussian weights of std ``scale/sqrt(fan_in)`` and small biases."""
    wx = rng.normal(0, scale / np.sqrt(dx), (n_factors, dx))
    wy = wx.copy() if tied else rng.normal(0, scale / np.sqrt(dy), (n_factors, dy))
    wh = rng.normal(0, scale / np.sqrt(n_factors), (n_hidden, n_factors))
    b = rng.normal(0, 0.3, n_hidden)
    ax = rng.normal(0, 0.3, dx)
    ay = ax.copy() if tied else rng.normal(0, 0.3, dy)
    return GaeParams(wx, wy, wh, b, ax, ay, activation)


def random_population(n_models, seed=0):
    """``n_models`` random (model, x, y) triples cycling through all activations.

    Sizes: D, L in [2, 20]; F, M in [1, 16].
    """
    out = []
    for i in range(n_models):
        rng = np.random.default_rng([seed, i])
        dx, dy = rng.integers(2, 21, size=2)
        f, m = rng.integers(1, 17, size=2)
        act = ACTIVATIONS[i % len(ACTIVATIONS)]
        p = random_gae(rng, dx, dy, f, m, act)
        out.append((p, rng.normal(size=dx), rng.normal(size=dy)))
    return out


def _fd_gradient(fn, y, step=FD_STEP):
    g = np.empty_like(y)
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = step
        g[j] = (fn(y + e) - fn(y - e)) / (2 * step)
    return g


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def gradient_suite(population):
    worst = 0.0
    for p, x, y in population:
        fd = _fd_gradient(lambda v: energy_conditional(p, x, v), y)
        worst = max(worst, _rel(fd, vector_field(p, x, y)))
    return SuiteResult("gradient_field", worst, TOL_GRADIENT, worst <= TOL_GRADIENT)


def untied_decoder(p: GaeParams, rng, size=0.3):
    """Copy of ``p`` whose decoding factor matrices differ from the encoder's."""
    q = p.copy()
    q.wy = q.wy + size * rng.normal(size=q.wy.shape)
    q.wx = q.wx + size * rng.normal(size=q.wx.shape)
    return q


def poincare_suite(population, break_tie_weights=False, seed=0):
    worst = 0.0
    for i, (p, x, y) in enumerate(population):
        dec = untied_decoder(p, np.random.default_rng([seed, i, 1])) if break_tie_weights else None
        for wrt in ("y", "x"):
            worst = max(worst, poincare_residual(p, x, y, wrt=wrt, decoder=dec))
    return SuiteResult("poincare", worst, TOL_POINCARE, worst <= TOL_POINCARE)


def poincare_control_suite(population, seed=0):
    """Untied decoders must be detected on a typical model.

    The statistic is the median residual over the population: at some
    points an untied field is still symmetric by accident (all relu units
    off, or a single factor whose gate is nearly closed).
    """
    res = []
    for i, (p, x, y) in enumerate(population):
        dec = untied_decoder(p, np.random.default_rng([seed, i, 1]))
        res.append(poincare_residual(p, x, y, wrt="y", decoder=dec))
    med = float(np.median(res))
    return SuiteResult("poincare_untied_control", med, CONTROL_MIN, med > CONTROL_MIN, "min")


def line_integral(p: GaeParams, x, path, steps):
    """Midpoint-rule integral of the field along a piecewise-linear ``path``.

    ``path`` is a list of vertices; ``steps`` is split between segments in
    proportion to their length.
    """
    path = [np.asarray(v, dtype=float) for v in path]
    lengths = np.array([np.linalg.norm(b - a) for a, b in zip(path, path[1:])])
    if lengths.sum() == 0:
        return 0.0
    counts = np.maximum(1, np.round(steps * lengths / lengths.sum()).astype(int))
    total = 0.0
    for (a, b), n in zip(zip(path, path[1:]), counts):
        t = (np.arange(n) + 0.5) / n
        pts = a + t[:, None] * (b - a)
        field = vector_field(p, np.broadcast_to(x, (n, x.size)), pts)
        total += float(np.sum(field @ (b - a)) / n)
    return total


def path_suite(n_models, steps=10_000, seed=0):
    worst = 0.0
    for i in range(n_models):
        rng = np.random.default_rng([seed, i, 2])
        dx, dy = rng.integers(2, 9, size=2)
        p = random_gae(rng, dx, dy, 6, 5, ACTIVATIONS[i % len(ACTIVATIONS)])
        x = rng.normal(size=dx)
        y0, y1 = rng.normal(size=dy), rng.normal(size=dy)
        exact = energy_conditional(p, x, y1) - energy_conditional(p, x, y0)
        axis = [y0.copy()]
        for j in range(dy):
            v = axis[-1].copy()
            v[j] = y1[j]
            axis.append(v)
        for path in ([y0, y1], axis):
            approx = line_integral(p, x, path, steps)
            worst = max(worst, abs(approx - exact) / max(abs(exact), 1e-12))
    return SuiteResult("path_independence", worst, TOL_PATH, worst <= TOL_PATH)


def _spread(a, b):
    return float(np.std(np.asarray(a) - np.asarray(b)))


def fcrbm_suite(n_models, n_points=50, seed=0):
    worst = 0.0
    for i in range(n_models):
        rng = np.random.default_rng([seed, i, 3])
        p = random_gae(rng, 5, 4, 4, 6)
        q = fcrbm_from_gae(p)
        xs, ys = rng.normal(size=(n_points, 5)), rng.normal(size=(n_points, 4))
        gae = [energy_conditional(p, x, y) for x, y in zip(xs, ys)]
        rbm = [fcrbm_free_energy(q, y, x) for x, y in zip(xs, ys)]
        worst = max(worst, _spread(gae, rbm))
    return SuiteResult("fcrbm_equivalence", worst, TOL_EQUIV, worst <= TOL_EQUIV)


def covariance_suite(n_models, n_points=50, seed=0):
    worst = 0.0
    for i in range(n_models):
        rng = np.random.default_rng([seed, i, 4])
        p = random_gae(rng, 6, 6, 5, 7, tied=True)
        q = covrbm_from_cae(p)
        xs = rng.normal(size=(n_points, 6))
        worst = max(worst, _spread([energy_covariance(p, x) for x in xs], [covrbm_free_energy(q, x) for x in xs]))
    return SuiteResult("cov_equivalence", worst, TOL_EQUIV, worst <= TOL_EQUIV)


def random_mean_ae(rng, dim, n_hidden):
    return MeanAeParams(
        rng.normal(0, 1 / np.sqrt(dim), (n_hidden, dim)), rng.normal(0, 0.3, n_hidden), rng.normal(0, 0.3, dim)
    )


def mean_covariance_suite(n_models, n_points=50, seed=0):
    worst = 0.0
    for i in range(n_models):
        rng = np.random.default_rng([seed, i, 5])
        c = random_gae(rng, 6, 6, 5, 4, tied=True)
        m = random_mean_ae(rng, 6, 5)
        qm, qc = gaussian_rbm_from_mean_ae(m), covrbm_from_cae(c)
        xs = rng.normal(size=(n_points, 6))
        ae = [energy_mean_covariance(m, c, x) for x in xs]
        rbm = [mcrbm_free_energy(qm, qc, x) for x in xs]
        worst = max(worst, _spread(ae, rbm))
    return SuiteResult("mc_equivalence", worst, TOL_EQUIV, worst <= TOL_EQUIV)


def bruteforce_suite(n_models, n_points=5, seed=0):
    """Closed-form free energies against enumeration of all hidden states."""
    worst = 0.0
    for i in range(n_models):
        rng = np.random.default_rng([seed, i, 6])
        m_hidden = int(rng.integers(1, 13))
        fq = fcrbm_from_gae(random_gae(rng, 4, 3, 3, m_hidden))
        cq = covrbm_from_cae(random_gae(rng, 4, 4, 3, m_hidden, tied=True))
        mq = gaussian_rbm_from_mean_ae(random_mean_ae(rng, 4, max(1, 12 - m_hidden)))
        for _ in range(n_points):
            x, y = rng.normal(size=3), rng.normal(size=4)
            v = rng.normal(size=4)
            pairs = [
                (fcrbm_free_energy(fq, x, y), fcrbm_free_energy_bruteforce(fq, x, y)),
                (covrbm_free_energy(cq, v), covrbm_free_energy_bruteforce(cq, v)),
                (gaussian_rbm_free_energy(mq, v), gaussian_rbm_free_energy_bruteforce(mq, v)),
                (mcrbm_free_energy(mq, cq, v), mcrbm_free_energy_bruteforce(mq, cq, v)),
            ]
            for closed, brute in pairs:
                worst = max(worst, abs(closed - brute) / max(abs(brute), 1e-12))
    return SuiteResult("bruteforce_free_energy", worst, TOL_BRUTE, worst <= TOL_BRUTE)


def run_all(seeds=100, break_tie_weights=False, seed=0):
    """Run every suite.  ``seeds`` sets the random-model population size."""
    seeds = max(1, int(seeds))
    population = random_population(seeds, seed)
    few = max(1, min(seeds, 10))
    return [
        gradient_suite(population),
        poincare_suite(population, break_tie_weights, seed),
        poincare_control_suite(population, seed),
        path_suite(min(few, 4), seed=seed),
        fcrbm_suite(few, seed=seed),
        covariance_suite(few, seed=seed),
        mean_covariance_suite(few, seed=seed),
        bruteforce_suite(few, seed=seed),
    ]
