import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import best_subset, check_contract, orthonormal_design
from greedy_ising.errors import EmptySupport, InnerSolveFailure, NoInactiveCoordinate
from greedy_ising.greedy import (
    GreedyConfig,
    ParamVector,
    backward_scan,
    default_max_support,
    forward_search,
    refit,
    removal_costs,
    run_greedy,
)
from greedy_ising.losses import NodeConditionalLogisticLoss, SquaredLoss

CFG = GreedyConfig(stop_threshold=0.01)

# node 0 of this matrix has 5 of 8 agreeing signs with either other node
TIE_DATA = np.array([
    [1, 1, 1], [1, -1, 1], [-1, -1, 1], [1, 1, -1],
    [-1, 1, -1], [1, 1, 1], [-1, -1, -1], [1, -1, -1],
])


def test_forward_search_orthonormal_closed_form(rng):
    n, p = 50, 6
    X = orthonormal_design(n, p, rng)
    y = rng.standard_normal(n)
    loss = SquaredLoss(X, y)
    j, alpha, gain = forward_search(loss, ParamVector.zeros(p), CFG)
    alphas = X.T @ y / n
    assert j == int(np.argmax(alphas**2))
    assert alpha == pytest.approx(alphas[j], abs=1e-12)
    assert gain == pytest.approx(alphas[j] ** 2 / 2, abs=1e-12)
    # grid check on the winning coordinate
    grid = np.linspace(alpha - 1, alpha + 1, 20001)
    vals = [loss.value(np.eye(p)[j] * a) for a in grid]
    assert abs(grid[int(np.argmin(vals))] - alpha) <= 1e-4


def test_forward_search_logistic_against_grid():
    loss = NodeConditionalLogisticLoss(TIE_DATA, 0)
    j, alpha, gain = forward_search(loss, ParamVector.zeros(2), CFG)
    # both coordinates tie; the lower index wins
    assert j == 0
    assert alpha == pytest.approx(math.log(5 / 3), abs=1e-8)
    assert gain == pytest.approx(0.031583942325020486, abs=1e-8)
    grid = np.round(np.arange(-50000, 50001) * 1e-4, 10)
    vals = [loss.value(np.array([a, 0.0])) for a in grid]
    assert abs(grid[int(np.argmin(vals))] - alpha) <= 1e-4
    assert loss.value(np.zeros(2)) - min(vals) == pytest.approx(gain, abs=1e-8)


def test_refit_with_intercept_matches_nested_bisection():
    x = np.array([[1, 1], [1, -1], [-1, -1], [1, 1], [-1, 1], [1, 1]])
    loss = NodeConditionalLogisticLoss(x, 0, include_intercept=True)
    theta = refit(loss, (0,), CFG)
    # nested bisection oracle: both equal atanh(1/2)
    np.testing.assert_allclose(theta.coeffs, [0.549306144334055] * 2, atol=1e-7)
    assert theta.support == (0,) and theta.fixed == (1,)


def test_refit_is_idempotent(rng):
    X = rng.standard_normal((30, 5))
    loss = SquaredLoss(X, rng.standard_normal(30))
    first = refit(loss, (1, 3), CFG)
    again = refit(loss, (1, 3), CFG, start=first.coeffs)
    np.testing.assert_allclose(again.coeffs, first.coeffs, atol=1e-12)
    coef, *_ = np.linalg.lstsq(X[:, [1, 3]], loss.response, rcond=None)
    np.testing.assert_allclose(first.coeffs[[1, 3]], coef, atol=1e-9)
    assert first.coeffs[[0, 2, 4]].tolist() == [0, 0, 0]


def test_refit_singular_support_raises():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    loss = SquaredLoss(X, np.array([1.0, 0.0, 1.0]))
    with pytest.raises(InnerSolveFailure) as info:
        refit(loss, (0, 1), CFG)
    assert info.value.support == (0, 1)


def test_backward_scan_single_active():
    loss = SquaredLoss(np.eye(3) * math.sqrt(3), np.array([1.0, 0.0, 0.0]))
    theta = refit(loss, (0,), CFG)
    j, inc = backward_scan(loss, theta)
    assert j == 0
    assert inc == pytest.approx(loss.value(np.zeros(3)) - loss.value(theta.coeffs))


def test_backward_scan_orthonormal_costs(rng):
    X = orthonormal_design(40, 4, rng)
    th = np.array([1.0, -0.3, 0.0, 0.7])
    loss = SquaredLoss(X, X @ th)
    theta = refit(loss, (0, 1, 3), CFG)
    costs = removal_costs(loss, theta)
    for j in (0, 1, 3):
        assert costs[j] == pytest.approx(th[j] ** 2 / 2, abs=1e-10)
        trial = theta.coeffs.copy()
        trial[j] = 0
        assert costs[j] == pytest.approx(loss.value(trial) - loss.value(theta.coeffs))
    assert backward_scan(loss, theta)[0] == 1


def test_empty_scans_raise():
    loss = SquaredLoss(np.eye(2), np.ones(2))
    with pytest.raises(EmptySupport):
        backward_scan(loss, ParamVector.zeros(2))
    with pytest.raises(NoInactiveCoordinate):
        forward_search(loss, ParamVector(np.ones(2), (0, 1)), CFG)


def test_zero_gradient_returns_zero():
    loss = SquaredLoss(np.eye(4), np.zeros(4))
    result = run_greedy(loss, CFG)
    assert result.support == ()
    assert not result.trace.steps
    assert np.all(result.theta_hat.coeffs == 0)
    check_contract(loss, result, CFG)


def test_small_sparse_instance_matches_best_subset(rng):
    X = orthonormal_design(100, 5, rng)
    th = np.array([1.0, 0.8, 0.0, 0.0, 0.0])
    y = X @ th + 0.05 * rng.standard_normal(100)
    loss = SquaredLoss(X, y)
    result = run_greedy(loss, CFG)
    assert result.support == best_subset(X, y, 2) == (0, 1)
    assert result.trace.n_backward == 0
    check_contract(loss, result, CFG)


def test_backward_step_removes_decoy():
    # decoy d correlates with y = a + b more than a or b alone, so it enters
    # first and must be dropped once a and b are both in
    n = 40
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((n, 3)))
    a, b, e = (q * math.sqrt(n)).T
    d = (a + b) / math.sqrt(2) * math.sqrt(0.8) + e * math.sqrt(0.2)
    X = np.column_stack([a, b, d])
    y = a + b
    loss = SquaredLoss(X, y)
    result = run_greedy(loss, CFG)
    kinds = [(s.kind, s.index) for s in result.trace.steps]
    assert kinds[0] == ("forward", 2)
    assert ("backward", 2) in kinds
    assert result.support == best_subset(X, y, 2) == (0, 1)
    check_contract(loss, result, CFG)


def test_support_cap_is_reported(rng):
    X = orthonormal_design(30, 5, rng)
    loss = SquaredLoss(X, X @ np.array([1.0, 1.0, 1.0, 0.0, 0.0]))
    result = run_greedy(loss, GreedyConfig(0.01, max_support=2))
    assert result.hit_support_cap
    assert len(result.support) == 2
    assert math.isnan(result.terminal_forward_gain)


def test_full_support_terminates():
    loss = SquaredLoss(np.eye(2) * math.sqrt(2), np.array([3.0, -3.0]))
    result = run_greedy(loss, CFG)
    assert result.support == (0, 1)
    assert result.terminal_forward_gain == 0.0


@pytest.mark.parametrize("kwargs", [
    {"stop_threshold": 0.0},
    {"stop_threshold": 0.1, "backward_factor": 1.0},
    {"stop_threshold": 0.1, "backward_factor": 0.0},
    {"stop_threshold": 0.1, "max_support": 0},
    {"stop_threshold": 0.1, "inner_max_iter": 0},
    {"stop_threshold": 0.1, "tie_break": "random"},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        GreedyConfig(**kwargs)


def test_param_vector_rejects_off_support_mass():
    with pytest.raises(ValueError):
        ParamVector(np.array([1.0, 0.5]), (0,))
    assert ParamVector.from_coeffs([0.0, 2.0, 0.0]).support == (1,)
    assert default_max_support(10) == 10
    assert default_max_support(10, 2) == 8


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    p=st.integers(1, 7),
    eps=st.floats(1e-3, 0.2),
    nu=st.floats(0.1, 0.9),
)
def test_squared_loss_runs_honor_contract(seed, p, eps, nu):
    rng = np.random.default_rng(seed)
    n = 3 * p + 5
    X = rng.standard_normal((n, p))
    y = X @ (rng.standard_normal(p) * (rng.random(p) < 0.5)) + 0.3 * rng.standard_normal(n)
    loss = SquaredLoss(X, y)
    cfg = GreedyConfig(eps, nu)
    result = run_greedy(loss, cfg)
    check_contract(loss, result, cfg)
    assert loss.value(result.theta_hat.coeffs) <= loss.value(np.zeros(p)) + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 6), intercept=st.booleans())
def test_logistic_runs_honor_contract(seed, p, intercept):
    rng = np.random.default_rng(seed)
    x = rng.choice(np.array([-1, 1]), size=(200, p))
    # tilt node 0 toward node 1 so some coordinate is worth adding
    x[:, 0] = np.where(rng.random(200) < 0.8, x[:, 1], x[:, 0])
    loss = NodeConditionalLogisticLoss(x, 0, intercept)
    cfg = GreedyConfig(0.005)
    result = run_greedy(loss, cfg)
    check_contract(loss, result, cfg)
    assert 0 in result.support
