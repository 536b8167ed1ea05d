"""Thin LP contract over scipy's HiGHS backend.

Every LP in the package goes through :func:`solve_lp`, which maps solver
status codes onto distinct exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, SolverError, UnboundedError


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    value: float
    ineq_slack: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(None, None)) -> LpResult:
    """Minimize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` follows :func:`scipy.optimize.linprog`: one ``(lo, hi)`` pair
    for all variables or a list of pairs, ``None`` meaning unbounded.
    """
    c = np.asarray(c, dtype=float)
    res = linprog(
        c,
        A_ub=None if A_ub is None else np.asarray(A_ub, float),
        b_ub=None if b_ub is None else np.asarray(b_ub, float),
        A_eq=None if A_eq is None else np.asarray(A_eq, float),
        b_eq=None if b_eq is None else np.asarray(b_eq, float),
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        raise InfeasibleError("LP is infeasible")
    if res.status == 3:
        raise UnboundedError("LP is unbounded")
    if res.status != 0:
        raise SolverError(f"LP solver failed: {res.message}")
    duals = None
    if A_ub is not None and getattr(res, "ineqlin", None) is not None:
        duals = np.asarray(res.ineqlin.marginals)
    slack = None if A_ub is None else np.asarray(res.slack)
    return LpResult(np.asarray(res.x), float(res.fun), slack, duals)
