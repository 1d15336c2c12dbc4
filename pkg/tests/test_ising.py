import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greedy_ising.errors import DegreeOutOfRange, NonBinaryData, NotPerfectSquare, TooLarge
from greedy_ising.ising import (
    GibbsSettings,
    IsingModel,
    SampleMatrix,
    all_states,
    assign_couplings,
    empirical_distribution,
    empirical_moments,
    exact_distribution,
    exact_moments,
    gibbs_sample,
    make_chain,
    make_grid4,
    make_star,
    seed_stream,
    sidecar_path,
)
from greedy_ising.losses import NodeConditionalLogisticLoss


def test_chain_counts():
    s = make_chain(4)
    assert sorted(s.edges) == [(0, 1), (1, 2), (2, 3)]
    assert s.degrees().tolist() == [1, 2, 2, 1]
    assert s.max_degree == 2


def test_grid_counts():
    s = make_grid4(9)
    assert len(s.edges) == 12
    assert s.degrees()[4] == 4 and s.max_degree == 4
    assert len(make_grid4(64).edges) == 2 * 8 * 7
    with pytest.raises(NotPerfectSquare):
        make_grid4(10)


def test_star_counts():
    s = make_star(36)
    assert len(s.edges) == 4
    assert s.degrees()[0] == 4
    assert make_star(100).max_degree == 10
    assert make_star(5, hub_degree=4).max_degree == 4
    with pytest.raises(DegreeOutOfRange):
        make_star(5, hub_degree=5)


def test_assign_couplings_signs_and_determinism():
    s = make_chain(10)
    m1 = assign_couplings(s, 0.5, seed=3)
    m2 = assign_couplings(s, 0.5, seed=seed_stream(3))
    assert m1.couplings == m2.couplings
    assert set(np.abs(list(m1.couplings.values()))) == {0.5}
    assert m1.edges == s.edges
    assert np.all(m1.fields == 0)
    signs = {assign_couplings(s, 1.0, seed=k).couplings[(0, 1)] for k in range(20)}
    assert signs == {-1.0, 1.0}


def test_exact_two_spin_moment():
    model = IsingModel(2, np.zeros(2), {(0, 1): 0.5})
    states, probs = exact_distribution(model)
    assert states.tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]
    # 4-state enumeration by hand
    w = np.exp([0.5, -0.5, -0.5, 0.5])
    np.testing.assert_allclose(probs, w / w.sum())
    assert exact_moments(model)[0, 1] == pytest.approx(0.46211715726000974)


def test_exact_chain_moments_are_products_of_tanh():
    J = [0.5, -0.5, 0.5]
    model = IsingModel(4, np.zeros(4), {(i, i + 1): w for i, w in enumerate(J)})
    M = exact_moments(model)
    for i in range(4):
        for j in range(i + 1, 4):
            assert M[i, j] == pytest.approx(np.prod(np.tanh(J[i:j])))


def test_enumeration_limit():
    with pytest.raises(TooLarge):
        exact_distribution(IsingModel(16, np.zeros(16)))
    assert all_states(3).shape == (8, 3)


def test_independent_spins_have_zero_means():
    n = 20_000
    data = gibbs_sample(IsingModel(5, np.zeros(5)), n, rng=seed_stream(1))
    assert np.all(np.abs(data.entries.mean(axis=0)) <= 4 / math.sqrt(n))


def test_gibbs_two_spins():
    model = IsingModel(2, np.zeros(2), {(0, 1): 0.5})
    data = gibbs_sample(model, 10_000, rng=seed_stream(2))
    assert abs(empirical_moments(data)[0, 1] - math.tanh(0.5)) <= 0.02


def test_gibbs_chain_with_fields():
    model = IsingModel(4, np.array([0.2, 0.0, -0.3, 0.1]),
                       {(0, 1): 0.5, (1, 2): -0.5, (2, 3): 0.5})
    data = gibbs_sample(model, 10_000, rng=seed_stream(3))
    assert np.max(np.abs(empirical_moments(data) - exact_moments(model))) <= 0.03


@pytest.mark.slow
def test_gibbs_total_variation_small_models():
    for p in (3, 6):
        model = assign_couplings(make_chain(p), 0.5, seed=p)
        data = gibbs_sample(model, 100_000, rng=seed_stream(4, p))
        _, probs = exact_distribution(model)
        tv = 0.5 * np.abs(empirical_distribution(data) - probs).sum()
        assert tv <= 0.02


def test_sampler_conditional_matches_loss_at_doubled_couplings(rng):
    model = IsingModel(5, rng.uniform(-0.5, 0.5, 5),
                       {(0, 1): 0.7, (0, 3): -0.4, (2, 4): 0.3, (1, 4): -0.9})
    x = rng.choice([-1, 1], size=(10, 5))
    for r in range(5):
        loss = NodeConditionalLogisticLoss(x, r, include_intercept=True)
        theta = loss.true_parameter(model)
        for row in x:
            assert model.conditional_prob_plus(row, r) == pytest.approx(
                loss.conditional_prob(theta, row), rel=1e-12
            )


def test_same_seed_same_samples():
    model = assign_couplings(make_chain(6), 0.5, seed=0)
    a = gibbs_sample(model, 50, rng=seed_stream(9, 1))
    b = gibbs_sample(model, 50, rng=seed_stream(9, 1))
    c = gibbs_sample(model, 50, rng=seed_stream(9, 2))
    assert np.array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, c.entries)


def test_csv_round_trip(tmp_path):
    model = assign_couplings(make_chain(4), 0.5, seed=1)
    data = gibbs_sample(model, 20, GibbsSettings(10, 2, 7))
    path = data.save(tmp_path / "x.csv")
    assert sidecar_path(path).exists()
    back = SampleMatrix.load(path)
    assert np.array_equal(back.entries, data.entries)
    assert IsingModel.from_dict(back.metadata["model"]).couplings == model.couplings
    assert back.metadata["sampler"]["thin_sweeps"] == 2
    assert back.metadata["n"] == 20


def test_sample_matrix_is_read_only():
    data = SampleMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        data.entries[0, 0] = -1
    with pytest.raises(NonBinaryData):
        SampleMatrix(np.array([[1, 2]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 1000))
def test_model_dict_round_trip(p, seed):
    model = assign_couplings(make_chain(p), 0.5, seed=seed)
    assert IsingModel.from_dict(model.to_dict()) == model
