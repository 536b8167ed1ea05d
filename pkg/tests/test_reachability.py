import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import reach_fixture
from walkopt.graph import Mdp
from walkopt.mdp import induced_chain
from walkopt.reachability import (PenaltyConfig, barrier_system, max_reach_exact, minmax_bound,
                                  relaxed_objective, relaxed_reach_lp, s_max,
                                  select_states_reachability)
from walkopt.submodular import Partition


def reach_vi(m, S, R, iters=20_000):
    """Independent oracle: value iteration from below for the maximal reach probability."""
    x = np.zeros(m.n)
    x[list(S)] = 1.0
    Pm = np.where(m.valid[:, :, None], m.P, 0.0)
    for _ in range(iters):
        q = np.einsum("iaj,j->ia", Pm, x)
        q[~m.valid] = -np.inf
        nx = q.max(axis=1)
        nx[list(S)] = 1.0
        nx[list(R)] = 0.0
        if np.abs(nx - x).max() < 1e-14:
            break
        x = nx
    return x


def chain_reach(P, S, R):
    """Absorption probability into S (R absorbing with value 0) for a fixed chain."""
    n = P.shape[0]
    stop = set(S) | set(R)
    # states with no path into S (through non-stopping states) have value 0
    can = np.zeros(n, bool)
    can[list(S)] = True
    for _ in range(n):
        can |= np.array([i not in stop and bool((P[i] > 0)[can].any()) for i in range(n)])
    free = [i for i in range(n) if i not in stop and can[i]]
    x = np.zeros(n)
    x[list(S)] = 1.0
    if free:
        A = np.eye(len(free)) - P[np.ix_(free, free)]
        b = P[np.ix_(free, list(S))].sum(axis=1)
        x[free] = np.linalg.solve(A, b)
    return x


def line(probs):
    """State 0 moves with the given probabilities; every other state is absorbing."""
    n = len(probs)
    P = np.zeros((n, 1, n))
    P[0, 0] = probs
    for i in range(1, n):
        P[i, 0, i] = 1.0
    return Mdp(P, np.ones((n, 1), bool))


def test_deterministic_and_split_examples():
    assert max_reach_exact(line([0, 1, 0]), [1], [2]).x.tolist() == [1.0, 1.0, 0.0]
    assert max_reach_exact(line([0, 0.5, 0.5]), [1], [2]).x[0] == pytest.approx(0.5)


def test_s_max_examples():
    assert s_max([0.9, 0.1, 0.5], 2) == (0, 2)
    assert s_max([0.9, 0.1, 0.5], 2, largest=False) == (1, 2)
    assert s_max([0.5, 0.5, 0.5], 1) == (0,)
    assert s_max([0.9, 0.8, 0.1, 0.2], Partition(((0, 1), (2, 3)))) == (0, 3)


def test_overlapping_sets_rejected():
    m = reach_fixture(6, 0)
    with pytest.raises(ValueError):
        max_reach_exact(m, [m.unsafe[0]], m.unsafe)


def test_rho_must_exceed_n():
    m = reach_fixture(6, 0)
    with pytest.raises(ValueError):
        select_states_reachability(m, m.unsafe, 2, PenaltyConfig(rho=6.0))


def test_barrier_system_has_interior_at_origin():
    m = reach_fixture(7, 1)
    keep, C, d = barrier_system(m, m.unsafe, 1e-5)
    assert (d - C @ np.zeros(keep.size) > 0).all()


def test_matroid_constrained_selection():
    m = reach_fixture(8, 2)
    blocks = ((0, 1, 2, 3), (4, 5, 6, 7))
    free = [b for b in blocks]
    sel = select_states_reachability(m, m.unsafe, Partition(free), PenaltyConfig.for_mdp(m, max_iter=3000))
    assert Partition(free).is_independent(sel.chosen)
    assert not set(sel.chosen) & set(m.unsafe)


@pytest.mark.parametrize("seed", range(3))
def test_selection_certificate_brackets_the_optimum(seed):
    m = reach_fixture(8, seed)
    k = 2
    sel = select_states_reachability(m, m.unsafe, k)
    cand = [i for i in range(m.n) if i not in m.unsafe]
    best = max(max_reach_exact(m, S).objective for S in itertools.combinations(cand, k))
    assert len(sel.chosen) == k
    assert sel.achieved <= best + 1e-9 <= sel.upper_bound + 2e-9
    assert sel.gap == pytest.approx(sel.upper_bound - sel.achieved)


# --------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 9), data=st.data())
def test_lp_matches_value_iteration(seed, n, data):
    m = reach_fixture(n, seed)
    cand = [i for i in range(n) if i not in m.unsafe]
    S = data.draw(st.sets(st.sampled_from(cand), min_size=1))
    val = max_reach_exact(m, S)
    assert np.allclose(val.x, reach_vi(m, S, m.unsafe), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 9), data=st.data())
def test_extracted_policy_attains_the_value(seed, n, data):
    m = reach_fixture(n, seed)
    cand = [i for i in range(n) if i not in m.unsafe]
    S = data.draw(st.sets(st.sampled_from(cand), min_size=1))
    val = max_reach_exact(m, S)
    got = chain_reach(induced_chain(m, val.policy).P, S, m.unsafe)
    assert np.allclose(got, val.x, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 8), data=st.data())
def test_penalty_above_n_makes_relaxation_exact(seed, n, data):
    m = reach_fixture(n, seed)
    cand = [i for i in range(n) if i not in m.unsafe]
    S = data.draw(st.sets(st.sampled_from(cand), min_size=1))
    val, x = relaxed_reach_lp(m, S)
    assert val == pytest.approx(max_reach_exact(m, S).objective, abs=1e-7)
    assert relaxed_objective(x, S, n + 1.0) == pytest.approx(val, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 8), k=st.integers(1, 3))
def test_minmax_bound_dominates_every_budget_set(seed, n, k):
    m = reach_fixture(n, seed)
    cand = [i for i in range(n) if i not in m.unsafe]
    k = min(k, len(cand))
    ub = minmax_bound(m, m.unsafe, k, n + 1.0)
    best = max(max_reach_exact(m, S).objective for S in itertools.combinations(cand, k))
    assert best <= ub + 1e-7


@settings(max_examples=40, deadline=None)
@given(x=st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=10), data=st.data())
def test_s_max_picks_extreme_entries(x, data):
    k = data.draw(st.integers(0, len(x)))
    top = s_max(x, k)
    rest = [v for v in range(len(x)) if v not in top]
    assert len(top) == k
    if top and rest:
        assert min(x[i] for i in top) >= max(x[i] for i in rest)
