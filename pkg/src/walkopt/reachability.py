"""Maximum reachability: exact LP, penalized relaxation, and barrier-subgradient selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Mdp, Policy, node_set
from .lp import solve_lp
from .submodular import Matroid

BIND_TOL = 1e-9


@dataclass(frozen=True)
class ReachValue:
    x: np.ndarray
    objective: float
    policy: Policy


@dataclass(frozen=True)
class PenaltyConfig:
    rho: float
    epsilon: float = 1e-6
    delta: float = 1e-3
    barrier_weight: float = 1e-2
    slack: float = 1e-5
    anneal_every: int = 100
    anneal_factor: float = 0.5
    max_iter: int = 100_000
    ascent: bool = True
    select_smallest: bool = True

    def __post_init__(self):
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")

    @classmethod
    def for_mdp(cls, m: Mdp, **kw) -> "PenaltyConfig":
        return cls(rho=m.n + 1.0, **kw)


def _action_rows(m: Mdp, free: np.ndarray):
    """Rows ``-x_i + sum_j P(i,a,j) x_j <= 0`` for every stored row of a free state."""
    rows = []
    for i, a in m.rows():
        if free[i]:
            r = m.P[i, a].copy()
            r[i] -= 1.0
            rows.append(r)
    return np.array(rows).reshape(-1, m.n)


def _check_sets(m: Mdp, S, R):
    S, R = node_set(S, m.n), node_set(R, m.n)
    if set(S) & set(R):
        raise ValueError("target and unsafe sets must be disjoint")
    return S, R


def extract_reach_policy(m: Mdp, x: np.ndarray, S, R) -> Policy:
    """Pick binding actions, preferring ones that make progress toward ``S``.

    States are settled backwards from ``S``: a state takes a binding action
    with support touching an already-settled state, so end components with
    constant ``x`` cannot trap the policy.
    """
    S, R = set(S), set(R)
    choice = [0 if m.passive[i] else int(np.flatnonzero(m.valid[i])[0]) for i in range(m.n)]
    settled = np.zeros(m.n, bool)
    settled[list(S)] = True
    binding = {}
    for i in range(m.n):
        if i in S or i in R or m.passive[i]:
            continue
        acts = [a for a in np.flatnonzero(m.valid[i]) if abs(m.P[i, a] @ x - x[i]) <= 1e-7]
        binding[i] = acts or [int(np.argmax(np.where(m.valid[i], m.P[i] @ x, -np.inf)))]
        if x[i] <= BIND_TOL:
            choice[i] = int(binding[i][0])
    progress = True
    while progress:
        progress = False
        for i, acts in binding.items():
            if settled[i] or x[i] <= BIND_TOL:
                continue
            for a in acts:
                if (m.P[i, a][settled] > 0).any():
                    choice[i] = int(a)
                    settled[i] = True
                    progress = True
                    break
    return Policy(choice)


def max_reach_exact(m: Mdp, S, R=None) -> ReachValue:
    """Maximal probability of reaching ``S`` while avoiding ``R``, per state, by LP."""
    R = m.unsafe if R is None else R
    S, R = _check_sets(m, S, R)
    bounds = [(0.0, 1.0)] * m.n
    for i in S:
        bounds[i] = (1.0, 1.0)
    for i in R:
        bounds[i] = (0.0, 0.0)
    free = np.ones(m.n, bool)
    free[list(S) + list(R)] = False
    A = _action_rows(m, free)
    res = solve_lp(np.ones(m.n), A if A.size else None, np.zeros(len(A)) if A.size else None, bounds=bounds)
    x = np.clip(res.x, 0.0, 1.0)
    x[list(S)] = 1.0
    x[list(R)] = 0.0
    return ReachValue(x, float(x.sum()), extract_reach_policy(m, x, S, R))


def relaxed_objective(x, S, rho: float) -> float:
    x = np.asarray(x, float)
    return float(x.sum() + rho * sum(1.0 - x[i] for i in S))


def _pi_rows(m: Mdp, R):
    free = np.ones(m.n, bool)
    free[list(R)] = False
    A = _action_rows(m, free)
    bounds = [(0.0, 0.0) if i in set(R) else (0.0, 1.0) for i in range(m.n)]
    return A, bounds


def relaxed_reach_lp(m: Mdp, S, R=None, rho: float | None = None) -> tuple[float, np.ndarray]:
    """Minimize ``1'x + rho sum_S (1 - x_i)`` over the reachability polytope (no ``x_S = 1``)."""
    R = m.unsafe if R is None else R
    S, R = _check_sets(m, S, R)
    rho = m.n + 1.0 if rho is None else rho
    A, bounds = _pi_rows(m, R)
    c = np.ones(m.n)
    c[list(S)] -= rho
    res = solve_lp(c, A if A.size else None, np.zeros(len(A)) if A.size else None, bounds=bounds)
    return res.value + rho * len(S), res.x


def minmax_bound(m: Mdp, R, k: int, rho: float, cand=None) -> float:
    """``min_x max_{|S| <= k} 1'x + rho sum_S (1 - x_i)`` as an LP.

    The inner max is the sum of the ``k`` largest ``1 - x_i`` over the
    candidates, written with a threshold variable ``t`` and excess ``u``.
    """
    R = node_set(R, m.n)
    cand = [i for i in range(m.n) if i not in R] if cand is None else list(cand)
    A, bounds = _pi_rows(m, R)
    n, c_n = m.n, len(cand)
    # variables: x (n), t (1), u (c_n)
    nv = n + 1 + c_n
    c = np.zeros(nv)
    c[:n] = 1.0
    c[n] = rho * k
    c[n + 1:] = rho
    rows = [np.hstack([A, np.zeros((len(A), 1 + c_n))])] if A.size else []
    # 1 - x_i - t - u_i <= 0
    E = np.zeros((c_n, nv))
    for q, i in enumerate(cand):
        E[q, i] = -1.0
        E[q, n] = -1.0
        E[q, n + 1 + q] = -1.0
    rows.append(E)
    A_ub = np.vstack(rows)
    b_ub = np.concatenate([np.zeros(len(A)), -np.ones(c_n)])
    bnds = bounds + [(None, None)] + [(0.0, None)] * c_n
    return solve_lp(c, A_ub, b_ub, bounds=bnds).value


def s_max(x, constraint, cand=None, largest: bool = True) -> tuple[int, ...]:
    """Top-``k`` entries of ``x`` (or a greedy max-weight matroid basis), low index first on ties."""
    x = np.asarray(x, float)
    cand = np.arange(x.size) if cand is None else np.asarray(sorted(cand))
    sign = -1.0 if largest else 1.0
    order = cand[np.argsort(sign * x[cand], kind="stable")]
    if isinstance(constraint, Matroid):
        S: list[int] = []
        for v in order:
            if constraint.is_independent(tuple(S) + (int(v),)):
                S.append(int(v))
        return tuple(sorted(S))
    return tuple(sorted(int(v) for v in order[: int(constraint)]))


@dataclass(frozen=True)
class ReachSelection:
    chosen: tuple[int, ...]
    achieved: float
    upper_bound: float
    gap: float
    iterations: int
    converged: bool
    x: np.ndarray
    value: ReachValue


def barrier_system(m: Mdp, R, slack: float):
    """Constraints ``C x < d`` of the relaxed polytope on the non-unsafe coordinates.

    Every row is loosened by ``slack``: rows such as a self-loop's
    ``0 <= 0`` leave no interior otherwise.
    """
    R = node_set(R, m.n)
    keep = np.array([i for i in range(m.n) if i not in set(R)])
    A, _ = _pi_rows(m, R)
    C = [A[:, keep]] if A.size else []
    eye = np.eye(keep.size)
    C += [eye, -eye]
    C = np.vstack(C)
    d = np.concatenate([np.zeros(len(A)), np.ones(keep.size), np.zeros(keep.size)]) + slack
    return keep, np.ascontiguousarray(C), d


def select_states_reachability(m: Mdp, R, constraint, cfg: PenaltyConfig | None = None) -> ReachSelection:
    """Barrier-subgradient loop on the min-max relaxation, then certify the chosen set by LP.

    ``constraint`` is a budget ``k`` or a :class:`Matroid` over the states.
    Starting from ``x = 0``, each step moves ``x`` by ``delta (v + w)``
    where ``v`` is 1 off the selected set and ``1 - rho`` on it, and ``w``
    pushes away from the constraint boundary.  The selected set holds the
    ``k`` smallest entries of ``x`` (the minimizer of the penalty sum);
    ``cfg.select_smallest=False`` takes the largest instead and
    ``cfg.ascent=False`` flips the sign of ``v``.
    """
    cfg = PenaltyConfig.for_mdp(m) if cfg is None else cfg
    if cfg.rho <= m.n:
        raise ValueError(f"rho must exceed n={m.n}")
    R = node_set(m.unsafe if R is None else R, m.n)
    keep, C, d = barrier_system(m, R, cfg.slack)
    x0 = np.zeros(keep.size)
    sign = 1.0 if cfg.ascent else -1.0
    largest = not cfg.select_smallest
    if isinstance(constraint, Matroid):
        xk, iters, conv = _matroid_loop(C, d, x0, keep, constraint, cfg, sign, largest)
    else:
        k = int(constraint)
        if not 0 <= k <= keep.size:
            raise ValueError(f"budget k={k} must lie in [0, {keep.size}]")
        cand = np.arange(keep.size, dtype=np.int64)
        xk, iters, conv = _kernels.barrier_subgradient(
            C, d, x0, cand, k, cfg.rho, cfg.delta, sign, cfg.epsilon, cfg.barrier_weight,
            cfg.anneal_every, cfg.anneal_factor, cfg.max_iter, largest)
    x = np.zeros(m.n)
    x[keep] = xk
    chosen = s_max(x, constraint, cand=keep, largest=largest)
    val = max_reach_exact(m, chosen, R)
    k_eff = len(chosen)
    ub = minmax_bound(m, R, max(k_eff, 1), cfg.rho) if k_eff else float(m.n - len(R))
    return ReachSelection(chosen, val.objective, ub, ub - val.objective, int(iters), bool(conv), x, val)


def _matroid_loop(C, d, x0, keep, mat, cfg, sign, largest):
    # same update as the compiled kernel, with a matroid-aware selection step
    pos = {int(s): q for q, s in enumerate(keep)}
    x = x0.copy()
    mu = cfg.barrier_weight
    for it in range(cfg.max_iter):
        full = np.zeros(int(keep.max()) + 1)
        full[keep] = x
        S = [pos[s] for s in s_max(full, mat, cand=keep, largest=largest)]
        v = np.ones_like(x)
        v[S] = 1.0 - cfg.rho
        step = cfg.delta * (sign * v - mu * (C.T @ (1.0 / (d - C @ x))))
        xn = x + step
        for _ in range(60):
            if np.all(d - C @ xn > 0.0):
                break
            step *= 0.5
            xn = x + step
        else:
            xn = x
        moved = np.linalg.norm(xn - x)
        x = xn
        if (it + 1) % cfg.anneal_every == 0:
            mu *= cfg.anneal_factor
        if moved <= cfg.epsilon:
            return x, it + 1, True
    return x, cfg.max_iter, False
