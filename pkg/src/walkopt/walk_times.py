"""Hitting, commute and cover times: exact solves, Monte Carlo, Matthews bound.

Paths are 0-indexed (``X_0`` is the start), so a walk that starts inside
the target set has hitting time 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _kernels
from .errors import SizeGuardError, UnreachableError
from .graph import StochasticGraph, as_distribution, node_set, path_streams, reachable_from

COVER_CAP = 10**6
EXACT_COVER_MAX = 15


@dataclass(frozen=True)
class TimeEstimate:
    mean: float
    half_width: float = 0.0
    samples: int = 0
    cap_hits: int = 0
    exact: float | None = None
    flags: tuple[str, ...] = ()

    def as_row(self) -> dict:
        return {"mean": self.mean, "half_width": self.half_width, "samples": self.samples,
                "cap_hits": self.cap_hits, "exact": self.exact, "flags": ";".join(self.flags)}


def _estimate(values: np.ndarray, cap_hits: int = 0, flags=()) -> TimeEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    hw = 1.96 * values.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    flags = list(flags)
    if n and cap_hits > 0.01 * n:
        flags.append("cap_hits_above_1pct")
    return TimeEstimate(float(values.mean()), float(hw), int(n), int(cap_hits), None, tuple(flags))


# ------------------------------------------------------------ absorbing solves

def _reach_mask(A: sp.csr_matrix, sources: np.ndarray) -> np.ndarray:
    """Nodes reachable (in >= 0 steps) from ``sources`` along ``A``."""
    reached = sources.copy()
    frontier = sources.copy()
    At = A.T.tocsr()
    while frontier.any():
        nxt = (At @ frontier.astype(np.int8)) > 0
        frontier = nxt & ~reached
        reached |= frontier
    return reached


def absorption_times(T, target: np.ndarray) -> np.ndarray:
    """Expected steps to enter ``target`` from every state; ``inf`` where not almost sure.

    ``T`` is a (sparse or dense) row-stochastic matrix.
    """
    T = sp.csr_matrix(T)
    N = T.shape[0]
    target = np.asarray(target, bool)
    free = ~target
    A = (T != 0).astype(np.int8).tocsr()
    # states that cannot reach the target at all
    stuck = free & ~_reach_mask(A.T.tocsr(), target)
    # states that can reach a stuck state without passing the target
    A_free = sp.diags(free.astype(np.int8)) @ A
    tainted = _reach_mask(A_free.T.tocsr(), stuck) & free
    good = free & ~tainted
    h = np.full(N, np.inf)
    h[target] = 0.0
    idx = np.flatnonzero(good)
    if idx.size:
        Tq = T[idx][:, idx]
        M = (sp.identity(idx.size, format="csc") - Tq).tocsc()
        h[idx] = np.atleast_1d(spsolve(M, np.ones(idx.size)))
    return h


def hitting_times(g: StochasticGraph, S) -> np.ndarray:
    """Vector of ``H(v, S)`` over all ``v``; ``inf`` where ``S`` is not hit almost surely."""
    S = node_set(S, g.n)
    if not S:
        raise ValueError("target set must be nonempty")
    target = np.zeros(g.n, bool)
    target[list(S)] = True
    return absorption_times(g.P, target)


def hitting_time_exact(g: StochasticGraph, S, start) -> float:
    """``H(start, S)`` for a start node or start distribution."""
    w = as_distribution(start, g.n)
    h = hitting_times(g, S)
    supp = w > 0
    if not np.isfinite(h[supp]).all():
        bad = np.flatnonzero(supp & ~np.isfinite(h)).tolist()
        raise UnreachableError(f"S={node_set(S)} is not reached almost surely from {bad}")
    return float(w[supp] @ h[supp])


def commute_time_exact(g: StochasticGraph, v: int, S) -> float:
    """Expected time to leave ``v``, visit ``S`` and come back to ``v``.

    Works on the doubled chain ``(node, flag)``; the flag records whether
    ``S`` was occupied at some earlier time, so for ``v`` in ``S`` this is
    the first-return time to ``v``.
    """
    S = node_set(S, g.n)
    if not S:
        raise ValueError("target set must be nonempty")
    n = g.n
    inS = np.zeros(n, bool)
    inS[list(S)] = True
    rows, cols, vals = [], [], []
    for flag in (0, 1):
        for u in range(n):
            nf = 1 if (flag or inS[u]) else 0
            for w in np.flatnonzero(g.P[u]):
                rows.append(u + flag * n)
                cols.append(w + nf * n)
                vals.append(g.P[u, w])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))
    target = np.zeros(2 * n, bool)
    target[v + n] = True
    h = absorption_times(T, target)[v]
    if not np.isfinite(h):
        raise UnreachableError(f"commute from {v} through {S} is not completed almost surely")
    return float(h)


def cover_time_exact_small(g: StochasticGraph, start: int, S) -> float:
    """Exact expected cover time of ``S`` from ``start`` on the (node, visited-mask) chain."""
    S = node_set(S, g.n)
    if len(S) > EXACT_COVER_MAX:
        raise SizeGuardError(f"|S|={len(S)} exceeds the exact cover limit {EXACT_COVER_MAX}")
    if not S:
        return 0.0
    n = g.n
    bit = np.zeros(n, np.int64)
    for b, s in enumerate(S):
        bit[s] = 1 << b
    full = (1 << len(S)) - 1
    m0 = int(bit[start])
    # explore only product states reachable from (start, m0)
    index = {(start, m0): 0}
    order = [(start, m0)]
    rows, cols, vals = [], [], []
    k = 0
    while k < len(order):
        u, mask = order[k]
        if mask == full:
            rows.append(k), cols.append(k), vals.append(1.0)
        else:
            for w in np.flatnonzero(g.P[u]):
                key = (int(w), mask | int(bit[w]))
                j = index.get(key)
                if j is None:
                    j = index[key] = len(order)
                    order.append(key)
                rows.append(k), cols.append(j), vals.append(g.P[u, w])
        k += 1
    N = len(order)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    target = np.array([mask == full for _, mask in order])
    h = absorption_times(T, target)[0]
    if not np.isfinite(h):
        raise UnreachableError(f"S={S} is not covered almost surely from {start}")
    return float(h)


# ---------------------------------------------------------------- Monte Carlo

def cover_time_mc(g: StochasticGraph, start: int, S, n_samples: int, cap: int = COVER_CAP,
                  seed=None, chunk: int = 4096) -> TimeEstimate:
    """Sample mean and 95% CI of the cover time of ``S`` from ``start``.

    Paths still uncovered after ``cap`` steps are counted at ``cap`` and
    reported in ``cap_hits``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    S = node_set(S, g.n)
    unvisited = np.zeros((n_samples, g.n), bool)
    unvisited[:, list(S)] = True
    unvisited[:, start] = False
    remaining = unvisited.sum(axis=1).astype(np.int64)
    state = np.full(n_samples, start, np.int64)
    times = np.zeros(n_samples, np.int64)
    streams = path_streams(seed, n_samples)
    used = 0
    cum = g.cum
    while used < cap:
        act = np.flatnonzero(remaining > 0)
        if act.size == 0:
            break
        horizon = min(chunk, cap - used)
        U = np.stack([streams[p].random(horizon) for p in act])
        st, un, rem = state[act].copy(), unvisited[act].copy(), remaining[act].copy()
        consumed = _kernels.cover_walk(cum, st, un, rem, U)
        state[act], unvisited[act], remaining[act] = st, un, rem
        done = rem == 0
        times[act[done]] = used + consumed[done]
        used += horizon
    capped = remaining > 0
    times[capped] = cap
    return _estimate(times, int(capped.sum()))


@dataclass
class PathSet:
    """A fixed batch of simulated paths with their first-visit times.

    Shared across set arguments (common random numbers), every statistic
    below is a deterministic function of ``S``.  ``fv[p, v]`` is the first
    time path ``p`` visits ``v``, or ``horizon + 1`` if it never does within
    the horizon (such entries are flagged as censored).
    """

    fv: np.ndarray
    horizon: int

    @classmethod
    def simulate(cls, g: StochasticGraph, start: int, n_paths: int, horizon: int, seed=None,
                 extend_until_covered: bool = False, cap: int = COVER_CAP) -> "PathSet":
        """Simulate ``n_paths`` paths; optionally keep extending until every reachable node is seen."""
        streams = path_streams(seed, n_paths)
        reach = reachable_from(g.adjacency, start)
        fv = np.full((n_paths, g.n), -1, np.int64)
        fv[:, start] = 0
        last = np.full(n_paths, start, np.int64)
        t0 = 0
        step = max(int(horizon), 1)
        while True:
            U = np.stack([r.random(step) for r in streams])
            paths = _kernels.walk_paths(g.cum, last, U)
            seg = _kernels.first_visits(paths, g.n)
            new = (fv < 0) & (seg >= 0)
            fv[new] = seg[new] + t0
            last = paths[:, -1].copy()
            t0 += step
            if not extend_until_covered or (fv[:, reach] >= 0).all() or t0 >= cap:
                break
            step = min(step * 2, cap - t0)
        fv[fv < 0] = t0 + 1
        return cls(fv, t0)

    @property
    def n_paths(self) -> int:
        return self.fv.shape[0]

    def censored(self, S) -> np.ndarray:
        return (self.fv[:, list(S)] > self.horizon).any(axis=1)

    def cover_times(self, S) -> np.ndarray:
        """Per-path cover time of ``S`` (0 for the empty set)."""
        S = list(S)
        if not S:
            return np.zeros(self.n_paths, np.int64)
        return self.fv[:, S].max(axis=1)

    def hitting_times(self, S) -> np.ndarray:
        S = list(S)
        if not S:
            raise ValueError("target set must be nonempty")
        return self.fv[:, S].min(axis=1)

    def exceeds(self, S, L: int) -> np.ndarray:
        """Per-path indicator that the cover time of ``S`` is above ``L``."""
        if L > self.horizon:
            raise ValueError(f"threshold {L} beyond simulated horizon {self.horizon}")
        return self.cover_times(S) > L


def cover_threshold_prob(g: StochasticGraph, start: int, S, L: int, n_samples: int, seed=None,
                         paths: PathSet | None = None) -> float:
    """Fraction of a fixed path sample whose cover time of ``S`` exceeds ``L``.

    Pass ``paths`` to evaluate many sets on the same sample.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    if paths is None:
        paths = PathSet.simulate(g, start, n_samples, max(L, 1), seed)
    return float(paths.exceeds(node_set(S, g.n), L).mean())


# ------------------------------------------------------------- stopping times

@dataclass(frozen=True)
class StoppingTimeSpec:
    """A stopping time on a path.

    ``kind`` is ``"reach"`` (first ``k`` with ``X_k = node``), ``"return"``
    (first ``k`` with ``X_k = origin`` after ``node`` was visited at an
    earlier time) or ``"custom"`` (first ``k`` where ``predicate`` holds on
    the prefix ``states[:k + 1]``).
    """

    kind: str
    node: int | None = None
    origin: int | None = None
    predicate: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("reach", "return", "custom"):
            raise ValueError(f"unknown stopping-time kind {self.kind!r}")
        if self.kind == "custom" and self.predicate is None:
            raise ValueError("custom stopping times need a predicate")
        if self.kind in ("reach", "return") and self.node is None:
            raise ValueError(f"{self.kind} stopping time needs a node")
        if self.kind == "return" and self.origin is None:
            raise ValueError("return stopping time needs an origin")

    def realize(self, states) -> int:
        """First time the stopping condition holds, or -1 if it never does."""
        states = np.asarray(states)
        if self.kind == "reach":
            hit = np.flatnonzero(states == self.node)
            return int(hit[0]) if hit.size else -1
        if self.kind == "return":
            seen = np.flatnonzero(states == self.node)
            if not seen.size:
                return -1
            back = np.flatnonzero(states[seen[0] + 1:] == self.origin)
            return int(seen[0] + 1 + back[0]) if back.size else -1
        for k in range(len(states)):
            if self.predicate(states[: k + 1]):
                return k
        return -1


@dataclass(frozen=True)
class AggregateResult:
    mean: float
    per_path: np.ndarray
    unresolved: int


def realize_all(paths: Sequence, specs: Sequence[StoppingTimeSpec]) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``Z[p, i]`` of realized stopping times and a mask of unresolved entries.

    Unresolved entries are set to the path length (cap-resolved).
    """
    Z = np.empty((len(paths), len(specs)), np.int64)
    for p, path in enumerate(paths):
        states = getattr(path, "states", path)
        for i, spec in enumerate(specs):
            Z[p, i] = spec.realize(states)
        Z[p, Z[p] < 0] = -len(states)
    unresolved = Z < 0
    Z[unresolved] = -Z[unresolved]
    return Z, unresolved


def stopping_time_aggregate(paths, specs, chosen, mode: str = "max") -> AggregateResult:
    """Empirical mean over paths of the max (or min) of the chosen stopping times."""
    chosen = list(chosen)
    if not chosen:
        raise ValueError("chosen index set must be nonempty")
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    Z, unres = realize_all(paths, [specs[i] for i in chosen])
    per = Z.max(axis=1) if mode == "max" else Z.min(axis=1)
    return AggregateResult(float(per.mean()), per, int(unres.any(axis=1).sum()))


# -------------------------------------------------------------- Matthews bound

def harmonic_prefix(k: int) -> float:
    """``1 + 1/2 + ... + 1/(k-1)``; zero for ``k <= 1``."""
    return float(sum(1.0 / j for j in range(1, k)))


def hit_floor(g: StochasticGraph) -> np.ndarray:
    """``min_{a != b} H(a, b)`` for each node ``b`` (``a = b`` would give 0)."""
    out = np.empty(g.n)
    for b in range(g.n):
        h = hitting_times(g, [b])
        h[b] = np.inf
        out[b] = h.min()
    return out


def matthews_bound(floors, sweep: str = "largest") -> float:
    """``max_k alpha_k c(k)`` with ``alpha_k`` the k-th largest floor and ``c(k) = H_{k-1}``.

    ``sweep="smallest"`` uses the k-th smallest value instead.
    """
    vals = np.asarray(floors, dtype=float)
    if vals.size == 0:
        raise ValueError("matthews_bound needs a nonempty set")
    if sweep not in ("largest", "smallest"):
        raise ValueError("sweep must be 'largest' or 'smallest'")
    ordered = np.sort(vals)[::-1] if sweep == "largest" else np.sort(vals)
    best = 0.0
    for k in range(2, vals.size + 1):
        best = max(best, ordered[k - 1] * harmonic_prefix(k))
    return float(best)


@dataclass(frozen=True)
class MatthewsSweep:
    chosen: tuple[int, ...]
    scores: np.ndarray
    floors: np.ndarray


def minimize_matthews(g: StochasticGraph, psi: float, floors=None) -> MatthewsSweep:
    """Minimize ``fhat(S) - psi |S|`` over prefixes of nodes sorted by hit floor.

    For fixed size k the k smallest floors minimize ``fhat``, so the sweep
    is exact.  The smallest k wins ties.
    """
    if psi < 0:
        raise ValueError("psi must be >= 0")
    floors = hit_floor(g) if floors is None else np.asarray(floors, float)
    order = np.argsort(floors, kind="stable")
    scores = np.array([matthews_bound(floors[order[:k]]) - psi * k for k in range(1, g.n + 1)])
    k = int(np.argmin(scores)) + 1
    return MatthewsSweep(node_set(order[:k]), scores, floors)
