import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cycle_mdp, multi_amec_mdp, reach_fixture, star_mdp, two_cycle_mdp
from walkopt.errors import UnreachableError
from walkopt.graph import Mdp, Policy, gen_random_mdp
from walkopt.mdp import (acpc_eval, acpc_optimal, amec_filter, induced_chain, long_run_visit_rate,
                         mec_decomposition, min_hitting_time_vi, prob0e, prob1e)
from walkopt.walk_times import hitting_times


def policies(m):
    choices = [[0] if m.passive[i] else m.actions(i) for i in range(m.n)]
    for c in itertools.product(*choices):
        yield Policy(c)


def cesaro_limit(P, squarings=60):
    # limit of the lazy chain equals the Cesaro limit of P
    M = 0.5 * (np.eye(P.shape[0]) + P)
    for _ in range(squarings):
        M = M @ M
        M /= M.sum(axis=1, keepdims=True)  # keep rounding from compounding
    return M


def acpc_by_enumeration(m, S):
    """max over states of the best long-run steps-per-visit, by trying every policy."""
    ind = np.zeros(m.n)
    ind[list(S)] = 1.0
    best_rate = np.zeros(m.n)
    for mu in policies(m):
        P = induced_chain(m, mu).P
        best_rate = np.maximum(best_rate, cesaro_limit(P) @ ind)
    return 1.0 / best_rate.min()


def min_hitting_by_enumeration(m, S):
    best = np.full(m.n, np.inf)
    for mu in policies(m):
        best = np.minimum(best, hitting_times(induced_chain(m, mu), S))
    return best


def brute_end_components(m):
    """All state sets that carry a closed, strongly connected sub-MDP (tiny MDPs only)."""
    out = []
    for r in range(1, m.n + 1):
        for C in itertools.combinations(range(m.n), r):
            inside = np.zeros(m.n, bool)
            inside[list(C)] = True
            acts = {i: [a for a in np.flatnonzero(m.valid[i]) if not (m.P[i, a][~inside] > 0).any()] for i in C}
            if not all(acts.values()):
                continue
            adj = np.zeros((m.n, m.n), bool)
            for i in C:
                for a in acts[i]:
                    adj[i] |= m.P[i, a] > 0
            R = adj[np.ix_(C, C)].astype(int) + np.eye(r, dtype=int)
            reach = np.linalg.matrix_power(R, r) > 0
            if reach.all():
                out.append(set(C))
    return out


# ---------------------------------------------------------------- examples

def test_self_loop_and_two_cycle():
    loop = Mdp(np.ones((1, 1, 1)), np.ones((1, 1), bool))
    assert acpc_optimal(loop, [0]).lam == pytest.approx(1.0, abs=1e-7)
    swap = Mdp(np.array([[[0.0, 1.0]], [[1.0, 0.0]]]), np.ones((2, 1), bool))
    assert acpc_optimal(swap, [0]).lam == pytest.approx(2.0, abs=1e-7)


def test_initial_bias_does_not_change_the_value():
    m = gen_random_mdp(6, seed=1)
    a = acpc_optimal(m, [0, 3]).lam
    b = acpc_optimal(m, [0, 3], h0=np.arange(6.0) * 10).lam
    assert a == pytest.approx(b, abs=1e-7)


def test_cycle_hub_reports_worst_state():
    # from inside the long cycle the hub is unreachable, so S = {hub} is never revisited
    with pytest.raises(UnreachableError):
        acpc_optimal(cycle_mdp([2, 3]), [0])


def test_two_cycle_end_components():
    mecs = mec_decomposition(two_cycle_mdp())
    assert [ec.states for ec in mecs] == [(1, 2), (3, 4, 5)]
    assert all(ec.is_closed_in(two_cycle_mdp()) for ec in mecs)
    assert [ec.states for ec in amec_filter(mecs, [4])] == [(1, 2)]


def test_passive_state_uses_its_forced_row():
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = P[0, 1, 0] = 1
    P[1, 0, 0] = 1
    valid = np.array([[1, 1], [1, 0]], bool)
    m = Mdp(P, valid, passive=[False, True])
    assert [ec.states for ec in mec_decomposition(m)] == [(0, 1)]
    assert induced_chain(m, Policy((0, 5))).P[1, 0] == 1.0


def test_prob_sets_on_reach_fixture():
    m = reach_fixture(8, seed=3)
    R = m.unsafe
    one = prob1e(m, [0, 1, 2, 3, 4, 5, 6, 7], avoid=())
    assert one.all()
    zero = prob0e(m, R)
    assert not zero[list(R)].any()


def test_acpc_eval_brackets_renewal_value():
    m = star_mdp(5, seed=2)
    best = acpc_optimal(m, [0])
    est = acpc_eval(m, best.policy, [0], 200_000, seed=3)
    assert est.exact == pytest.approx(best.lam, rel=1e-6)
    assert abs(est.mean - est.exact) <= 2 * est.half_width


def test_visit_rate_mixes_closed_classes():
    m = multi_amec_mdp(0, sizes=(2, 3), unsafe=False)
    g = induced_chain(m, Policy((0,) * m.n))
    acpc, rate = long_run_visit_rate(g, [2, 3], start=0)
    # only the first block contains the target; the other block contributes inf
    assert np.isinf(acpc) and 0 < rate < 1


# --------------------------------------------------------------- properties

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 5), data=st.data())
def test_acpc_matches_policy_enumeration(seed, n, data):
    m = gen_random_mdp(n, seed=seed, n_actions=2)
    S = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    assert acpc_optimal(m, S).lam == pytest.approx(acpc_by_enumeration(m, S), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 5), data=st.data())
def test_acpc_policy_achieves_the_value(seed, n, data):
    m = gen_random_mdp(n, seed=seed, n_actions=2)
    S = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    val = acpc_optimal(m, S)
    rate = cesaro_limit(induced_chain(m, val.policy).P)[:, S].sum(axis=1)
    assert 1.0 / rate.min() == pytest.approx(val.lam, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 6), data=st.data())
def test_acpc_is_monotone_in_the_target(seed, n, data):
    m = gen_random_mdp(n, seed=seed, n_actions=2)
    S = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    v = data.draw(st.integers(0, n - 1))
    assert acpc_optimal(m, S | {v}).lam <= acpc_optimal(m, S).lam + 1e-7


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 6), data=st.data())
def test_min_hitting_time_matches_enumeration(seed, n, data):
    m = reach_fixture(n, seed)
    S = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    vi = min_hitting_time_vi(m, S)
    oracle = min_hitting_by_enumeration(m, S)
    assert np.array_equal(np.isinf(vi.values), np.isinf(oracle))
    fin = np.isfinite(oracle)
    assert np.allclose(vi.values[fin], oracle[fin], rtol=1e-7, atol=1e-7)
    # the greedy policy attains the value wherever it is finite
    h = hitting_times(induced_chain(m, vi.policy), S)
    assert np.allclose(h[fin], oracle[fin], rtol=1e-7, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 6))
def test_mecs_match_brute_force(seed, n):
    m = reach_fixture(n, seed)
    mecs = mec_decomposition(m)
    ecs = brute_end_components(m)
    mec_sets = [set(ec.states) for ec in mecs]
    for ec in ecs:
        assert any(ec <= M for M in mec_sets)
    for M in mec_sets:
        assert M in ecs
    for ec in mecs:
        assert ec.is_closed_in(m)
