"""Policy-induced chains, end components, and value-iteration oracles for MDPs.

Passive states (no actions) take part through their forced row, which is
stored as action 0; for end components it behaves like a single action.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import UnreachableError, WalkoptError
from .graph import Mdp, Policy, StochasticGraph, node_set, reaching, simulate_path, stationary_linear
from .walk_times import TimeEstimate

VI_TOL = 1e-10
VI_MAX_ITER = 10**6
LAMBDA_CAP = 1e9


def induced_chain(m: Mdp, mu: Policy) -> StochasticGraph:
    mu.validate(m)
    rows = np.array([0 if m.passive[i] else mu.choice[i] for i in range(m.n)])
    return StochasticGraph(m.P[np.arange(m.n), rows])


# ------------------------------------------------------------- end components

@dataclass(frozen=True)
class EndComponent:
    states: tuple[int, ...]
    allowed: dict

    def __post_init__(self):
        if not self.states:
            raise ValueError("end component must be nonempty")
        if set(self.allowed) != set(self.states) or not all(self.allowed.values()):
            raise ValueError("every end-component state needs at least one allowed action")

    def is_closed_in(self, m: Mdp) -> bool:
        inside = np.zeros(m.n, bool)
        inside[list(self.states)] = True
        return all(not (m.P[i, a][~inside] > 0).any() for i in self.states for a in self.allowed[i])


def _scc_labels(n, edges):
    if not edges:
        return np.arange(n)
    r, c = zip(*edges)
    G = csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    return connected_components(G, directed=True, connection="strong")[1]


def mec_decomposition(m: Mdp) -> list[EndComponent]:
    """Maximal end components by repeated SCC splitting and action pruning."""
    allowed = {i: set(np.flatnonzero(m.valid[i]).tolist()) for i in range(m.n)}
    alive = np.ones(m.n, bool)
    while True:
        edges = [(i, int(j)) for i in range(m.n) if alive[i]
                 for a in allowed[i] for j in np.flatnonzero(m.P[i, a])]
        label = _scc_labels(m.n, edges)
        changed = False
        for i in range(m.n):
            if not alive[i]:
                continue
            keep = {a for a in allowed[i]
                    if all(alive[j] and label[j] == label[i] for j in np.flatnonzero(m.P[i, a]))}
            if keep != allowed[i]:
                allowed[i] = keep
                changed = True
            if not keep:
                alive[i] = False
                changed = True
        if not changed:
            break
    groups: dict = {}
    for i in np.flatnonzero(alive):
        groups.setdefault(label[i], []).append(int(i))
    out = [EndComponent(tuple(g), {i: tuple(sorted(allowed[i])) for i in g}) for g in groups.values()]
    return sorted(out, key=lambda ec: ec.states)


def amec_filter(mecs, R) -> list[EndComponent]:
    R = set(R)
    return [ec for ec in mecs if not R & set(ec.states)]


# ------------------------------------------------------------ qualitative sets

def prob1e(m: Mdp, S, avoid=()) -> np.ndarray:
    """States from which some policy reaches ``S`` with probability 1 while avoiding ``avoid``."""
    S = node_set(S, m.n)
    target = np.zeros(m.n, bool)
    target[list(S)] = True
    blocked = np.zeros(m.n, bool)
    blocked[list(avoid)] = True
    blocked &= ~target
    U = ~blocked
    while True:
        R = target.copy()
        while True:
            grow = R.copy()
            for i in np.flatnonzero(U & ~R):
                for a in np.flatnonzero(m.valid[i]):
                    supp = m.P[i, a] > 0
                    if not (supp & ~U).any() and (supp & R).any():
                        grow[i] = True
                        break
            if (grow == R).all():
                break
            R = grow
        if (R == U).all():
            return U
        U = R


def prob0e(m: Mdp, S, avoid=()) -> np.ndarray:
    """States from which some policy avoids ``S`` forever (reach probability can be 0)."""
    target = np.zeros(m.n, bool)
    target[list(S)] = True
    blocked = np.zeros(m.n, bool)
    blocked[list(avoid)] = True
    adj = np.zeros((m.n, m.n), bool)
    for i, a in m.rows():
        if not blocked[i] and not target[i]:
            adj[i] |= m.P[i, a] > 0
    return ~reaching(adj, np.flatnonzero(target))


# ----------------------------------------------------------- hitting-time VI

@dataclass(frozen=True)
class HittingValue:
    values: np.ndarray
    policy: Policy
    iterations: int


def _greedy_policy(m: Mdp, Q: np.ndarray) -> Policy:
    choice = []
    for i in range(m.n):
        if m.passive[i]:
            choice.append(0)
            continue
        q = np.where(m.valid[i], Q[i], np.inf)
        choice.append(int(np.argmin(q)) if np.isfinite(q).any() else int(np.flatnonzero(m.valid[i])[0]))
    return Policy(choice)


def _restricted(m: Mdp, keep: np.ndarray):
    """Kernel and action mask restricted to ``keep`` with actions that stay inside it."""
    idx = np.flatnonzero(keep)
    P = m.P[np.ix_(idx, np.arange(m.n_actions), idx)]
    valid = m.valid[idx] & (np.abs(P.sum(axis=2) - 1.0) <= 1e-12)
    return idx, np.ascontiguousarray(P), valid


def min_hitting_time_vi(m: Mdp, S, tol: float = VI_TOL, max_iter: int = VI_MAX_ITER) -> HittingValue:
    """Minimal expected hitting time of ``S`` over policies, by value iteration.

    Entries are ``inf`` at states where no policy reaches ``S`` almost surely.
    """
    S = node_set(S, m.n)
    if not S:
        raise ValueError("target set must be nonempty")
    good = prob1e(m, S)
    idx, P, valid = _restricted(m, good)
    target = np.isin(idx, S)
    cost = np.ones(valid.shape)
    h, iters = _kernels.ssp_value_iteration(P, valid, cost, target, np.zeros(idx.size), tol, max_iter)
    if iters >= max_iter:
        raise WalkoptError(f"hitting-time value iteration did not converge in {max_iter} sweeps")
    values = np.full(m.n, np.inf)
    values[idx] = h
    full = np.where(np.isfinite(values), values, 0.0)
    Q = 1.0 + np.einsum("iaj,j->ia", m.P, full)
    # actions that may leave the almost-sure region are never optimal
    leaks = np.einsum("iaj,j->ia", m.P, (~good).astype(float)) > 0
    Q[leaks] = np.inf
    return HittingValue(values, _greedy_policy(m, Q), int(iters))


# ------------------------------------------------------------- optimal ACPC

@dataclass(frozen=True)
class AcpcValue:
    lam: float
    policy: Policy
    bias: np.ndarray
    bisection_steps: int


def _gain(m: Mdp, S_mask: np.ndarray, lam: float, h0, tol, max_iter):
    hit = m.P[:, :, S_mask].sum(axis=2)
    cost = 1.0 - lam * hit
    h, d, iters = _kernels.relative_value_iteration(m.P, m.valid, cost, h0, 0.5, tol, max_iter)
    return h, d, cost


def acpc_optimal(m: Mdp, S, tol: float = 1e-8, inner_tol: float = 1e-12, h0=None,
                 max_iter: int = VI_MAX_ITER) -> AcpcValue:
    """Smallest achievable long-run steps per visit to ``S``.

    Bisection on ``lam``: the average of the per-step cost ``1 - lam P(i,a,S)``
    is nonpositive at every state exactly when some policy reaches ``S``
    every ``lam`` steps on average.  The MDP is assumed communicating
    enough that this holds at every state for large ``lam``.
    """
    S = node_set(S, m.n)
    if not S:
        raise ValueError("target set must be nonempty")
    mask = np.zeros(m.n, bool)
    mask[list(S)] = True
    h = np.zeros(m.n) if h0 is None else np.asarray(h0, float)

    def upper(lam):
        nonlocal h
        h, d, _ = _gain(m, mask, lam, h, inner_tol, max_iter)
        return d.max() <= 0.0

    lo, hi = 0.0, 1.0
    steps = 0
    while not upper(hi):
        lo = hi
        hi *= 2.0
        steps += 1
        if hi > LAMBDA_CAP:
            raise UnreachableError(f"no policy visits {S} infinitely often from every state")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if upper(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    h, d, cost = _gain(m, mask, hi, h, inner_tol, max_iter)
    Q = cost + np.einsum("iaj,j->ia", m.P, h)
    return AcpcValue(hi, _greedy_policy(m, Q), h, steps)


# ---------------------------------------------------------- ACPC of a policy

def long_run_visit_rate(g: StochasticGraph, S, start: int = 0) -> tuple[float, float]:
    """Expected ACPC and expected S-visit rate of the chain from ``start``.

    Each closed class ``c`` reached with probability ``p_c`` contributes its
    renewal value ``1 / pi_c(S)``.
    """
    S = node_set(S, g.n)
    adj = g.P > 0
    n_cls, label = connected_components(csr_matrix(adj), directed=True, connection="strong")
    closed = [c for c in range(n_cls)
              if not (adj[label == c][:, label != c]).any()]
    # absorption probabilities into each closed class from start
    transient = ~np.isin(label, closed)
    acpc, rate = 0.0, 0.0
    for c in closed:
        members = label == c
        if members[start]:
            p = 1.0
        elif not transient[start]:
            p = 0.0
        else:
            t = np.flatnonzero(transient)
            A = np.eye(t.size) - g.P[np.ix_(t, t)]
            b = g.P[np.ix_(t, np.flatnonzero(members))].sum(axis=1)
            p = float(np.linalg.solve(A, b)[np.searchsorted(t, start)])
        if p <= 1e-15:
            continue
        idx = np.flatnonzero(members)
        sub = StochasticGraph(g.P[np.ix_(idx, idx)] / g.P[np.ix_(idx, idx)].sum(axis=1, keepdims=True))
        pi = stationary_linear(sub)
        mass = float(pi[np.isin(idx, S)].sum())
        rate += p * mass
        acpc += p * (np.inf if mass <= 0 else 1.0 / mass)
    return acpc, rate


def acpc_eval(m: Mdp, mu: Policy, S, horizon: int, seed=None, start: int = 0,
              batches: int = 20) -> TimeEstimate:
    """Simulated steps per visit to ``S`` under ``mu`` (cycle ends at each ``t >= 1`` in ``S``).

    The CI comes from batch means of the visit rate.  ``exact`` holds the
    renewal value from the induced chain's closed classes.
    """
    S = node_set(S, m.n)
    g = induced_chain(m, mu)
    states = simulate_path(g, start, horizon, seed).states[1:]
    inS = np.isin(states, S)
    visits = int(inS.sum())
    exact, _ = long_run_visit_rate(g, S, start)
    if visits == 0:
        return TimeEstimate(float("inf"), float("inf"), horizon, 0, exact, ("no_visits",))
    rate = visits / horizon
    usable = (horizon // batches) * batches
    hw = 0.0
    if usable >= batches > 1:
        rb = inS[:usable].reshape(batches, -1).mean(axis=1)
        hw = 1.96 * rb.std(ddof=1) / np.sqrt(batches) / rate**2
    return TimeEstimate(1.0 / rate, float(hw), horizon, 0, exact, ())
