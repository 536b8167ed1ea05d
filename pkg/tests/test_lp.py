import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walkopt.errors import InfeasibleError, UnboundedError
from walkopt.lp import solve_lp


def test_bounded_minimum():
    res = solve_lp([1.0], bounds=[(3, 10)])
    assert res.value == pytest.approx(3.0) and res.x[0] == pytest.approx(3.0)


def test_infeasible_and_unbounded_are_distinct():
    with pytest.raises(InfeasibleError):
        solve_lp([1.0], A_ub=[[1.0]], b_ub=[-1.0], bounds=[(0, None)])
    with pytest.raises(UnboundedError):
        solve_lp([-1.0], bounds=[(0, None)])


def test_slack_and_duals_reported():
    # min -x - y  s.t. x + y <= 1, x <= 0.75
    res = solve_lp([-1, -1], A_ub=[[1, 1], [1, 0]], b_ub=[1, 0.75], bounds=[(0, None)] * 2)
    assert res.value == pytest.approx(-1.0)
    assert res.ineq_slack[0] == pytest.approx(0.0, abs=1e-9)
    assert res.ineq_duals[0] == pytest.approx(-1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 5), m=st.integers(1, 6))
def test_box_lp_matches_vertex_enumeration(seed, n, m):
    # on a box with random cuts the optimum is no worse than any sampled feasible point
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = np.abs(rng.normal(size=m)) + 0.1  # origin is strictly feasible
    res = solve_lp(c, A_ub=A, b_ub=b, bounds=[(-1, 1)] * n)
    assert (A @ res.x <= b + 1e-8).all() and (np.abs(res.x) <= 1 + 1e-9).all()
    pts = rng.uniform(-1, 1, size=(2000, n))
    feas = pts[(pts @ A.T <= b).all(axis=1)]
    if feas.size:
        assert res.value <= (feas @ c).min() + 1e-9
