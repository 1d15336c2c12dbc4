import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greedy_ising.errors import NonBinaryData
from greedy_ising.ising import GibbsSettings, IsingModel, gibbs_sample, seed_stream
from greedy_ising.losses import (
    NodeConditionalLogisticLoss,
    SquaredLoss,
    logistic_gradient,
    logistic_value,
)
from greedy_ising.diagnostics import measure_noise_level


def central_diff(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def max_rel_error(loss, theta):
    g = loss.gradient(theta)
    fd = central_diff(loss.value, theta)
    scale = max(np.max(np.abs(g)), np.max(np.abs(fd)), 1e-12)
    return float(np.max(np.abs(g - fd)) / scale)


def random_sign_matrix(rng, n, p):
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, p))


def test_value_at_zero_is_log2(rng):
    x = random_sign_matrix(rng, 30, 5)
    loss = NodeConditionalLogisticLoss(x, 2)
    assert loss.value(np.zeros(4)) == pytest.approx(math.log(2), abs=1e-15)


def test_single_sample_value():
    # margin 0.5: log(1 + e^0.5) - 0.5
    assert logistic_value([0.5], 0, [[1, 1]]) == pytest.approx(0.4740769841801067, rel=1e-12)


def test_large_margin_is_stable():
    # log1p(exp(-100)), which a naive evaluation rounds to zero
    v = logistic_value([100.0], 0, [[1, 1]])
    assert v == pytest.approx(3.720075976020836e-44, rel=1e-10)
    assert logistic_value([-800.0], 0, [[1, 1]]) == pytest.approx(800.0)


def test_gradient_at_zero_is_half_mean_feature(rng):
    x = random_sign_matrix(rng, 25, 4)
    loss = NodeConditionalLogisticLoss(x, 1)
    z = x[:, [1]] * x[:, [0, 2, 3]]
    np.testing.assert_allclose(loss.gradient(np.zeros(3)), -z.mean(axis=0) / 2, atol=1e-15)
    np.testing.assert_allclose(logistic_gradient(np.zeros(3), 1, x), loss.gradient(np.zeros(3)))


def test_intercept_layout(rng):
    x = random_sign_matrix(rng, 12, 3)
    loss = NodeConditionalLogisticLoss(x, 1, include_intercept=True)
    assert loss.local_to_global == (0, 2)
    assert loss.fixed == (2,)
    assert loss.candidates == (0, 1)
    np.testing.assert_array_equal(loss.features[:, 2], x[:, 1])


def test_rejects_non_binary():
    with pytest.raises(NonBinaryData):
        NodeConditionalLogisticLoss(np.array([[1, 0], [1, -1]]), 0)
    with pytest.raises(NonBinaryData):
        NodeConditionalLogisticLoss(np.array([1, -1]), 0)


def test_gradient_fidelity_logistic():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(2, 8))
        x = random_sign_matrix(rng, int(rng.integers(5, 60)), p)
        loss = NodeConditionalLogisticLoss(x, int(rng.integers(p)), bool(rng.integers(2)))
        worst = max(worst, max_rel_error(loss, rng.uniform(-2, 2, loss.dim)))
    assert worst <= 1e-5


def test_gradient_fidelity_squared():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n, p = int(rng.integers(5, 40)), int(rng.integers(1, 8))
        loss = SquaredLoss(rng.standard_normal((n, p)), rng.standard_normal(n))
        worst = max(worst, max_rel_error(loss, rng.uniform(-2, 2, p)))
    assert worst <= 1e-5


def test_squared_loss_closed_forms(rng):
    X = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    loss = SquaredLoss(X, y)
    th = np.array([0.3, -1.0, 2.0])
    r = y - X @ th
    assert loss.value(th) == pytest.approx(r @ r / 40)
    np.testing.assert_allclose(loss.gradient(th), -X.T @ r / 20)
    np.testing.assert_allclose(loss.hessian(th), X.T @ X / 20)


def test_hessian_matches_gradient_differences(rng):
    x = random_sign_matrix(rng, 40, 5)
    loss = NodeConditionalLogisticLoss(x, 3, include_intercept=True)
    th = rng.uniform(-1, 1, loss.dim)
    fd = np.column_stack([
        (loss.gradient(th + h) - loss.gradient(th - h)) / 2e-6
        for h in np.eye(loss.dim) * 1e-6
    ])
    np.testing.assert_allclose(loss.hessian(th), fd, atol=1e-8)


sign_rows = st.lists(st.lists(st.sampled_from([-1, 1]), min_size=4, max_size=4),
                     min_size=1, max_size=20)
coef = st.lists(st.floats(-5, 5), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(sign_rows, coef, coef, st.integers(0, 3))
def test_convex_along_segments(rows, a, b, node):
    loss = NodeConditionalLogisticLoss(np.array(rows), node)
    a, b = np.array(a), np.array(b)
    mid = loss.value((a + b) / 2)
    assert mid <= (loss.value(a) + loss.value(b)) / 2 + 1e-12


@settings(max_examples=60, deadline=None)
@given(sign_rows, coef, st.integers(0, 3))
def test_gradient_entries_bounded(rows, th, node):
    g = NodeConditionalLogisticLoss(np.array(rows), node).gradient(np.array(th))
    assert np.all(np.abs(g) <= 1.0)


def test_noise_level_concentrates_under_null():
    p, n = 10, 10_000
    null = IsingModel(p, np.zeros(p))
    hits = 0
    for trial in range(100):
        data = gibbs_sample(null, n, GibbsSettings(burn_in_sweeps=5, thin_sweeps=1),
                            rng=seed_stream(99, trial))
        loss = NodeConditionalLogisticLoss(data, trial % p)
        hits += measure_noise_level(loss, np.zeros(p - 1)) <= 3 * math.sqrt(math.log(p) / n)
    assert hits >= 95


def test_noise_level_at_doubled_couplings_is_small():
    # the population gradient vanishes at twice the model couplings, not at the couplings
    p, n = 4, 20_000
    model = IsingModel(p, np.zeros(p), {(0, 1): 0.5, (1, 2): -0.5, (2, 3): 0.5})
    data = gibbs_sample(model, n, GibbsSettings(thin_sweeps=3), rng=seed_stream(5))
    loss = NodeConditionalLogisticLoss(data, 1)
    at_truth = measure_noise_level(loss, loss.true_parameter(model))
    at_half = measure_noise_level(loss, loss.true_parameter(model) / 2)
    assert at_truth < 0.02 < at_half
