import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedae.energy import (
    antiderivative,
    energy_conditional,
    energy_covariance,
    energy_covariance_grad,
    energy_mean,
    energy_mean_covariance,
    energy_symmetric,
    poincare_residual,
    softplus,
    stack_pair,
    stacked_vector_field,
    vector_field,
)
from gatedae.errors import CapabilityError, ShapeError, UsageError
from gatedae.gae import Activation, GaeParams, MeanAeParams
from gatedae.verify import untied_decoder
from helpers import central_diff, example_params, random_params, rel_err

LOG2 = 0.693147180559945309417
SOFTPLUS_10 = 10.0000453988992168646  # mpmath, 30 digits
ACTS = [a.value for a in Activation]


def test_antiderivative_examples():
    assert antiderivative("sigmoid", [0.0]) == pytest.approx(LOG2, rel=1e-15)
    assert antiderivative("sigmoid", [10.0]) == pytest.approx(SOFTPLUS_10, rel=1e-15)
    assert antiderivative("linear", [3.0, 4.0]) == 12.5
    assert antiderivative("relu", [3.0, -4.0]) == 4.5
    assert antiderivative("tanh", [0.0]) == 0.0


def test_antiderivative_rejects_unsupported():
    for kind in ("softmax", "modulus", "square"):
        with pytest.raises(CapabilityError):
            antiderivative(kind, [0.0])


def test_softplus_no_overflow():
    v = softplus(np.array([-1000.0, 1000.0]))
    assert np.all(np.isfinite(v)) and v[1] == 1000.0 and v[0] == 0.0


@pytest.mark.parametrize("kind", ACTS)
def test_antiderivative_derivative_is_activation(kind):
    u = np.linspace(-3, 3, 13) + 0.05  # avoid the relu kink at 0
    act = Activation.parse(kind)
    fd = np.array([(antiderivative(kind, [v + 1e-6]) - antiderivative(kind, [v - 1e-6])) / 2e-6 for v in u])
    assert np.allclose(fd, act(u), atol=1e-8)


def test_vector_field_examples():
    rng = np.random.default_rng(0)
    p = random_params(rng)
    # at x = 0 the reconstruction is ay, so y = ay is a fixed point
    assert np.array_equal(vector_field(p, np.zeros(3), p.ay), np.zeros(3))
    z = GaeParams(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 1)), [0.0], [0.0, 0.0], [0.0, 0.0])
    assert np.array_equal(vector_field(z, [1.0, 1.0], [4.0, 5.0]), [-4.0, -5.0])


def test_conditional_energy_hand_example():
    e = energy_conditional(example_params(), [2.0, 3.0], [4.0, 5.0])
    assert e == pytest.approx(SOFTPLUS_10 - 20.5, abs=1e-12)


def test_conditional_energy_zero_model():
    p = GaeParams(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((5, 2)), np.zeros(5), np.zeros(3), np.zeros(3))
    assert energy_conditional(p, np.ones(3), np.zeros(3)) == pytest.approx(5 * LOG2, rel=1e-15)


@pytest.mark.parametrize("kind", ACTS)
def test_energy_gradient_is_vector_field(kind):
    for seed in range(25):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 4, 5, 3, 3, kind)
        x, y = rng.normal(size=4), rng.normal(size=5)
        fd = central_diff(lambda v: energy_conditional(p, x, v), y)
        assert rel_err(fd, vector_field(p, x, y)) <= 1e-5


def test_hand_example_field_matches_gradient():
    p = example_params()
    x, y = np.array([2.0, 3.0]), np.array([4.0, 5.0])
    fd = central_diff(lambda v: energy_conditional(p, x, v), y)
    assert rel_err(fd, vector_field(p, x, y)) <= 1e-5


def test_stationary_at_fixed_point():
    rng = np.random.default_rng(1)
    p = random_params(rng)
    x0, y = np.zeros(3), p.ay
    grad = central_diff(lambda v: energy_conditional(p, x0, v), y)
    assert np.linalg.norm(grad) <= 1e-8


@pytest.mark.parametrize("kind", ACTS)
def test_poincare_residual_small(kind):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 4, 4, 3, 3, kind)
        x, y = rng.normal(size=4), rng.normal(size=4)
        assert poincare_residual(p, x, y, "y") <= 1e-6
        assert poincare_residual(p, x, y, "x") <= 1e-6


def test_poincare_linear_tight():
    rng = np.random.default_rng(2)
    p = random_params(rng, 4, 4, 3, 3, "linear")
    assert poincare_residual(p, rng.normal(size=4), rng.normal(size=4)) <= 1e-8


def test_poincare_detects_untied_decoder():
    rng = np.random.default_rng(3)
    p = random_params(rng, 4, 4, 3, 3)
    x, y = rng.normal(size=4), rng.normal(size=4)
    assert poincare_residual(p, x, y, decoder=untied_decoder(p, rng)) > 1e-3


def test_poincare_argument_checks():
    p = example_params()
    with pytest.raises(UsageError):
        poincare_residual(p, [1.0, 2.0], [1.0, 2.0], wrt="z")
    with pytest.raises(ShapeError):
        poincare_residual(p, np.zeros((2, 2)), np.zeros((2, 2)))


def test_stack_pair_is_block_swap():
    s = stack_pair([1.0, 2.0], [3.0, 4.0, 5.0])
    assert list(s.xi) == [3, 4, 5, 1, 2] and list(s.gamma) == [1, 2, 3, 4, 5]


def test_symmetric_energy_gradient_is_stacked_field():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 3, 4, 3, 2, ACTS[seed % 4])
        x, y = rng.normal(size=3), rng.normal(size=4)
        fd = central_diff(lambda xi: energy_symmetric(p, xi[4:], xi[:4]), np.concatenate([y, x]))
        assert rel_err(fd, stacked_vector_field(p, x, y)) <= 1e-5


def test_symmetric_zero_model():
    p = GaeParams(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(4), np.zeros(3), np.zeros(3))
    assert energy_symmetric(p, np.zeros(3), np.zeros(3)) == pytest.approx(4 * LOG2)


def test_symmetric_on_diagonal_against_covariance():
    # Same hidden term and the same -||x||^2; the stacked bias counts a.x twice.
    rng = np.random.default_rng(4)
    p = random_params(rng, 4, 4, 3, 3, tied=True)
    for x in rng.normal(size=(5, 4)):
        diff = energy_symmetric(p, x, x) - energy_covariance(p, x)
        assert diff == pytest.approx(p.ax @ x, abs=1e-12)
    q = p.copy()
    q.ax[:] = 0
    q.ay[:] = 0
    x = rng.normal(size=4)
    assert energy_symmetric(q, x, x) == pytest.approx(energy_covariance(q, x), abs=1e-12)


def test_covariance_energy_hand_example():
    p = GaeParams([[1.0, 0.0]], [[1.0, 0.0]], [[1.0]], [0.0], [0.0, 0.0], [0.0, 0.0])
    assert energy_covariance(p, [2.0, 0.0]) == pytest.approx(0.0181499279178097403550, abs=1e-13)
    assert energy_covariance(p, [0.0, 0.0]) == pytest.approx(LOG2)


def test_covariance_requires_tied_factors():
    rng = np.random.default_rng(5)
    with pytest.raises(UsageError):
        energy_covariance(random_params(rng, 3, 3), np.zeros(3))


def test_covariance_gradient_analytic():
    rng = np.random.default_rng(6)
    p = random_params(rng, 5, 5, 4, 3, tied=True)
    x = rng.normal(size=5)
    fd = central_diff(lambda v: energy_covariance(p, v), x)
    assert rel_err(energy_covariance_grad(p, x), fd) <= 1e-6


def test_mean_energy_and_sum():
    rng = np.random.default_rng(7)
    m = MeanAeParams(rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4))
    c = random_params(rng, 4, 4, 2, 2, tied=True)
    xs = rng.normal(size=(6, 4))
    assert np.array_equal(energy_mean_covariance(m, c, xs), energy_mean(m, xs) + energy_covariance(c, xs))
    zm = MeanAeParams(np.zeros((3, 4)), np.zeros(3), np.zeros(4))
    zc = GaeParams(np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((5, 2)), np.zeros(5), np.zeros(4), np.zeros(4))
    assert energy_mean_covariance(zm, zc, np.zeros(4)) == pytest.approx(8 * LOG2)


def test_mean_energy_gradient_is_mean_ae_field():
    from gatedae.gae import mean_decode, mean_encode

    rng = np.random.default_rng(8)
    m = MeanAeParams(rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4))
    x = rng.normal(size=4)
    fd = central_diff(lambda v: energy_mean(m, v), x)
    assert rel_err(fd, mean_decode(m, mean_encode(m, x)) - x) <= 1e-6


def test_energy_batch_matches_single():
    rng = np.random.default_rng(9)
    p = random_params(rng, 3, 3, 2, 2)
    xs, ys = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    batch = energy_conditional(p, xs, ys)
    assert np.allclose(batch, [energy_conditional(p, a, b) for a, b in zip(xs, ys)], rtol=0, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_path_independence_two_point(seed, s, t):
    # energy differences do not depend on the route: E(c)-E(a) = (E(b)-E(a)) + (E(c)-E(b))
    from gatedae.verify import line_integral

    rng = np.random.default_rng(seed)
    p = random_params(rng, 3, 3, 2, 2, ACTS[seed % 4])
    x = rng.normal(size=3)
    a = rng.normal(size=3)
    c = a + np.array([s, t, s - t])
    b = a + np.array([t, 0.3, s])
    direct = line_integral(p, x, [a, c], 2000)
    bent = line_integral(p, x, [a, b, c], 2000)
    exact = energy_conditional(p, x, c) - energy_conditional(p, x, a)
    scale = max(abs(exact), 1e-3)
    assert abs(direct - exact) / scale <= 1e-3
    assert abs(bent - exact) / scale <= 1e-3
