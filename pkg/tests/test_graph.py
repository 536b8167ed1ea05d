import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete_graph
from walkopt.errors import NotErgodicError
from walkopt.graph import (LATTICE_ACTIONS, Mdp, Policy, StochasticGraph, gen_erdos_renyi, gen_lattice_mdp,
                           gen_random_mdp, node_set, simulate_path, simulate_paths,
                           stationary_distribution, stationary_linear)

SWAP = StochasticGraph(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_node_set_normalizes_and_checks_range():
    assert node_set([3, 1, 3], 4) == (1, 3)
    with pytest.raises(ValueError):
        node_set([4], 4)


def test_rows_must_be_stochastic():
    with pytest.raises(ValueError):
        StochasticGraph(np.array([[0.5, 0.4], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        StochasticGraph(np.array([[1.5, -0.5], [0.0, 1.0]]))


def test_from_weights_repairs_empty_rows():
    g = StochasticGraph.from_weights([[0, 0], [2, 2]])
    assert np.array_equal(g.P, [[1.0, 0.0], [0.5, 0.5]])


def test_swap_chain_path():
    assert simulate_path(SWAP, 0, 3, seed=1).states.tolist() == [0, 1, 0, 1]


def test_absorbing_path():
    g = StochasticGraph(np.array([[1.0, 0.0], [0.5, 0.5]]))
    assert simulate_path(g, 0, 5, seed=7).states.tolist() == [0] * 6


def test_path_determinism_and_bad_start():
    g = complete_graph(3)
    a = simulate_path(g, 0, 200, seed=11).states
    b = simulate_path(g, 0, 200, seed=11).states
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        simulate_path(g, 3, 5)


def test_batch_paths_independent_of_batch_size():
    g = gen_erdos_renyi(6, 0.5, seed=3)
    big = simulate_paths(g, 0, 30, 8, seed=5)
    assert big.shape == (8, 31)
    assert np.array_equal(big, simulate_paths(g, 0, 30, 8, seed=5))


def test_paths_from_distribution_start():
    g = complete_graph(4)
    pi = np.array([0.0, 0.0, 1.0, 0.0])
    assert (simulate_paths(g, pi, 5, 10, seed=0)[:, 0] == 2).all()


@pytest.mark.parametrize("P,expected", [
    ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
    ([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]], [1 / 3] * 3),
])
def test_stationary_symmetric(P, expected):
    assert np.allclose(stationary_distribution(StochasticGraph(np.array(P))), expected, atol=1e-12)


def test_stationary_two_state_against_linear_solve():
    g = StochasticGraph(np.array([[0.9, 0.1], [0.5, 0.5]]))
    pi = stationary_distribution(g)
    assert np.allclose(pi, [5 / 6, 1 / 6], atol=1e-12)
    assert np.allclose(pi, stationary_linear(g), atol=1e-12)
    assert np.abs(pi @ g.P - pi).max() <= 1e-12


def test_stationary_rejects_periodic():
    with pytest.raises(NotErgodicError):
        stationary_distribution(SWAP)


def test_visit_frequencies_match_stationary():
    g = gen_erdos_renyi(6, 0.6, seed=2)
    assert g.is_strongly_connected()
    pi = stationary_distribution(g)
    T = 200_000
    freq = np.bincount(simulate_path(g, 0, T, seed=9).states, minlength=g.n) / (T + 1)
    # 3 standard errors with a generous autocorrelation allowance
    se = np.sqrt(pi * (1 - pi) / T) * 10
    assert (np.abs(freq - pi) <= 3 * se).all()


def test_erdos_renyi_complete_and_deterministic():
    g = gen_erdos_renyi(3, 1.0, seed=0)
    assert np.allclose(g.P, (np.ones((3, 3)) - np.eye(3)) / 2)
    assert np.array_equal(gen_erdos_renyi(10, 0.3, seed=4).P, gen_erdos_renyi(10, 0.3, seed=4).P)
    big = gen_erdos_renyi(50, 0.2, seed=1)
    assert np.abs(big.P.sum(axis=1) - 1).max() <= 1e-12


def test_lattice_deterministic_move():
    m = gen_lattice_mdp(2, 2, 1.0)
    right = LATTICE_ACTIONS.index("right")
    assert m.P[0, right, 1] == pytest.approx(1.0)


def test_lattice_noise_mixture_at_center():
    m = gen_lattice_mdp(3, 3, 0.5)
    up = LATTICE_ACTIONS.index("up")
    row = m.P[4, up]
    assert row[1] == pytest.approx(0.5 + 0.5 / 4)
    for j in (3, 5, 7):
        assert row[j] == pytest.approx(0.5 / 4)
    assert np.abs(m.P.sum(axis=2) - 1).max() <= 1e-12
    assert m.grid == (3, 3)


def test_lattice_corner_spill_goes_to_feasible_moves():
    m = gen_lattice_mdp(3, 3, 0.5)
    up = LATTICE_ACTIONS.index("up")
    row = m.P[0, up]
    # the whole row lands on the two feasible neighbours
    assert row[1] + row[3] == pytest.approx(1.0)
    assert row[1] == pytest.approx(0.5)


def test_random_mdp_shape_and_uniform_mean():
    m = gen_random_mdp(10, seed=3)
    assert m.P.shape == (10, 4, 10)
    assert np.abs(m.P.sum(axis=2) - 1).max() <= 1e-12
    assert np.array_equal(m.P, gen_random_mdp(10, seed=3).P)
    rows = gen_random_mdp(200, seed=0).P.reshape(-1, 200)
    # each coordinate of a flat Dirichlet has mean 1/n and sd about 1/n
    se = (1 / 200) / np.sqrt(rows.shape[0])
    assert np.abs(rows.mean(axis=0) - 1 / 200).max() <= 5 * se


def test_mdp_passive_rows_and_restrict():
    P = np.zeros((3, 2, 3))
    P[0, 0, 1] = P[0, 1, 2] = 1
    P[1, 0, 1] = 1
    P[2, 0, 0] = 1
    valid = np.array([[1, 1], [1, 0], [1, 0]], bool)
    m = Mdp(P, valid, passive=[False, False, True])
    assert m.actions(2) == []
    assert m.actions(0) == [0, 1]
    sub = m.restrict([1])
    assert sub.n == 1 and sub.P[0, 0, 0] == 1
    with pytest.raises(ValueError):
        Policy((0, 1, 0)).validate(m)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 12), p=st.floats(0.05, 1.0), seed=st.integers(0, 10**6))
def test_generated_rows_are_stochastic(n, p, seed):
    g = gen_erdos_renyi(n, p, seed=seed)
    assert np.abs(g.P.sum(axis=1) - 1).max() <= 1e-12
    path = simulate_path(g, 0, 50, seed=seed).states
    assert (g.P[path[:-1], path[1:]] > 0).all()


@settings(max_examples=20, deadline=None)
@given(rows=st.integers(2, 5), cols=st.integers(2, 5), p_c=st.floats(0.01, 1.0))
def test_lattice_rows_are_stochastic(rows, cols, p_c):
    m = gen_lattice_mdp(rows, cols, p_c)
    assert np.abs(m.P.sum(axis=2) - 1).max() <= 1e-12
    assert (m.P >= 0).all()
