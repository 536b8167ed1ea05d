import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walkopt.errors import InfeasibleError
from walkopt.submodular import (APRIORI_MAX, EvaluationError, Partition, Uniform, Union, bases,
                                brute_force_min, check_diminishing_returns, descent_greedy,
                                greedy_chain_min, greedy_matroid, greedy_max_cardinality,
                                greedy_min_cover, is_independent, matroid_partition, min_weight_basis,
                                minimize_submodular, wolsey_ratio)


def coverage(sets, weights):
    def f(S):
        cov = set().union(*(sets[i] for i in S)) if S else set()
        return float(sum(weights[e] for e in cov))
    return f


def random_coverage(rng, n, universe=10):
    sets = [set(rng.choice(universe, size=rng.integers(1, 5), replace=False).tolist()) for _ in range(n)]
    return coverage(sets, rng.uniform(0.1, 1.0, universe))


def cut_plus_modular(rng, n):
    W = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5)
    w = rng.normal(0, 1.0, n)

    def f(S):
        inS = np.zeros(n, bool)
        inS[list(S)] = True
        return float(W[inS][:, ~inS].sum() + w[inS].sum())
    return f


# ------------------------------------------------------------------ examples

def test_modular_greedy_picks_heaviest():
    w = [3.0, 1.0, 2.0]
    rep = greedy_max_cardinality(lambda S: sum(w[i] for i in S), range(3), 2)
    assert rep.chosen == (0, 2) and rep.value == pytest.approx(5.0)
    assert rep.bound == pytest.approx(APRIORI_MAX)


def test_partition_greedy_takes_one_per_block():
    w = [5.0, 1.0, 4.0, 2.0]
    rep = greedy_matroid(lambda S: sum(w[i] for i in S), Partition(((0, 1), (2, 3))), range(4))
    assert rep.chosen == (0, 2)


def test_matroid_examples():
    assert not is_independent(Uniform(2), (0, 1, 2))
    assert is_independent(Union(Uniform(1), Uniform(1)), (0, 1))
    assert not is_independent(Union(Uniform(1), Uniform(1)), (0, 1, 2))
    with pytest.raises(ValueError):
        Partition(((0, 1), (1, 2)))
    assert is_independent(Partition(((0, 1),)), (0, 5, 6))


def test_square_of_size_is_supermodular():
    f = lambda S: float(len(S) ** 2)
    assert check_diminishing_returns(f, range(6), 200, "sub", seed=0)
    assert not check_diminishing_returns(f, range(6), 200, "super", seed=0)


def test_evaluation_error_carries_the_set():
    def f(S):
        if 2 in S:
            raise ZeroDivisionError
        return len(S)
    with pytest.raises(EvaluationError) as err:
        greedy_max_cardinality(f, range(4), 3)
    assert 2 in err.value.set


def test_lazy_and_plain_greedy_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        f = random_coverage(rng, 8)
        a = greedy_max_cardinality(f, range(8), 4)
        b = greedy_max_cardinality(f, range(8), 4, lazy=True)
        assert a.chosen == b.chosen and b.evaluations <= a.evaluations


def test_wolsey_ratio_cases():
    assert wolsey_ratio(10, 0, 1) == pytest.approx(1 + math.log(10))
    assert wolsey_ratio(0, 0, 0) == 1.0
    assert wolsey_ratio(5, 0, 0) == math.inf


def test_cover_infeasible_and_trivial():
    f = lambda S: 3.0 - len(S) if len(S) < 2 else 1.0
    with pytest.raises(InfeasibleError):
        greedy_min_cover(f, range(4), target=0.0)
    assert greedy_min_cover(lambda S: 0.0, range(3)).chosen == ()


def test_cover_tiebreak_and_done_hook():
    f = lambda S: 0.0 if S and max(S) >= 1 else 1.0
    rep = greedy_min_cover(f, range(3), tiebreak=lambda S: -sum(S))
    assert rep.chosen == (2,)
    rep = greedy_min_cover(lambda S: -len(S), range(5), done=lambda S: len(S) >= 3)
    assert len(rep.chosen) == 3


def test_cover_max_size_marks_incomplete():
    rep = greedy_min_cover(lambda S: 4.0 - len(S), range(4), max_size=2)
    assert len(rep.chosen) == 2 and not rep.meta["complete"]


def test_matroid_partition_handles_exchange():
    # 0 can go anywhere, 1 only in the first factor; inserting 1 must evict 0
    parts = matroid_partition([Partition(((0, 1),)), Partition(((0, 2), (1,)))], (0, 1))
    assert parts is not None
    left, right = parts
    assert Partition(((0, 1),)).is_independent(left) and Partition(((0, 2), (1,))).is_independent(right)


def test_descent_stalls_where_chain_crosses_plateau():
    # one element alone is neutral, two together pay off
    f = lambda S: -5.0 if len(S) >= 2 else 0.0
    assert descent_greedy(f, range(3)).chosen == ()
    chain = greedy_chain_min(f, range(3))
    assert chain.chosen == (0, 1) and chain.value == -5.0


def test_sfm_on_empty_ground():
    assert minimize_submodular(lambda S: 2.0, []).minimizer == ()


# ---------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8), k=st.integers(1, 4))
def test_greedy_meets_the_apriori_factor(seed, n, k):
    rng = np.random.default_rng(seed)
    f = random_coverage(rng, n)
    k = min(k, n)
    rep = greedy_max_cardinality(f, range(n), k)
    opt = max(f(S) for S in itertools.combinations(range(n), k))
    assert rep.value >= APRIORI_MAX * opt - 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8))
def test_cover_size_within_wolsey_bound(seed, n):
    rng = np.random.default_rng(seed)
    g = random_coverage(rng, n)
    total = g(tuple(range(n)))
    f = lambda S: total - g(S)  # nonincreasing, supermodular residual
    rep = greedy_min_cover(f, range(n), target=1e-12, confirm=1)
    opt = min(len(S) for r in range(n + 1) for S in itertools.combinations(range(n), r) if f(S) <= 1e-12)
    assert f(rep.chosen) <= 1e-12
    assert len(rep.chosen) <= rep.bound * opt + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 9))
def test_sfm_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    f = cut_plus_modular(rng, n)
    res = minimize_submodular(f, range(n))
    _, best = brute_force_min(f, range(n))
    assert res.value == pytest.approx(best, abs=1e-9)
    assert f(res.minimizer) == pytest.approx(res.value, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8))
def test_cut_functions_pass_the_diminishing_returns_check(seed, n):
    f = cut_plus_modular(np.random.default_rng(seed), n)
    assert not check_diminishing_returns(f, range(n), 100, "sub", seed=seed)


def union_oracle(blocks, k, S):
    # brute force: one element per block goes to the partition side, the rest
    # must fit in the uniform side; elements outside every block are free
    S = set(S)
    per_block = [S & set(b) for b in blocks]
    return sum(max(len(p) - 1, 0) for p in per_block) <= k


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(0, 3))
def test_union_independence_matches_oracle(seed, k):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(9)
    cuts = sorted(rng.choice(np.arange(1, 9), size=2, replace=False))
    blocks = [tuple(b) for b in np.split(perm[:8], cuts)]
    m = Union(Partition(blocks), Uniform(k))
    for r in range(0, 6):
        for S in itertools.combinations(range(9), r):
            if rng.random() < 0.2:
                assert m.is_independent(S) == union_oracle(blocks, k, S), (blocks, k, S)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_min_weight_basis_is_optimal(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=7)
    m = Union(Partition(((0, 1, 2), (3, 4))), Uniform(1))
    B = min_weight_basis(w, m, range(7))
    assert B in bases(m, range(7))
    assert w[list(B)].sum() == pytest.approx(min(w[list(b)].sum() for b in bases(m, range(7))))
