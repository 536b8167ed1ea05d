"""Markov chains, MDP containers, sample-path simulation and generators.

All containers are immutable after construction.  Nodes are integers in
``range(n)``; node sets are passed around as sorted tuples (see
:func:`node_set`).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import NotErgodicError

ROW_TOL = 1e-12

# lattice action labels, in action-index order
LATTICE_ACTIONS = ("up", "down", "left", "right")
_LATTICE_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def node_set(members: Iterable[int], n: int | None = None) -> tuple[int, ...]:
    """Normalize ``members`` into a sorted duplicate-free tuple, range-checked against ``n``."""
    out = tuple(sorted({int(v) for v in members}))
    if n is not None and out and (out[0] < 0 or out[-1] >= n):
        raise ValueError(f"node set {out} out of range for n={n}")
    return out


def as_distribution(start, n: int) -> np.ndarray:
    """Return ``start`` as a length-``n`` probability vector.

    An integer is read as the point mass on that node.
    """
    if np.isscalar(start) and float(start).is_integer():
        v = int(start)
        if not 0 <= v < n:
            raise ValueError(f"start node {v} out of range for n={n}")
        w = np.zeros(n)
        w[v] = 1.0
        return w
    w = np.asarray(start, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"distribution must have shape ({n},), got {w.shape}")
    if (w < 0).any() or abs(w.sum() - 1.0) > ROW_TOL * max(n, 1):
        raise ValueError("distribution must be nonnegative and sum to 1")
    return w


def _check_rows(P: np.ndarray, tol: float, what: str) -> None:
    if (P < -tol).any() or (P > 1 + tol).any():
        raise ValueError(f"{what}: entries must lie in [0, 1]")
    err = np.abs(P.sum(axis=-1) - 1.0)
    if err.size and err.max() > tol:
        raise ValueError(f"{what}: rows must sum to 1 (max error {err.max():.3g})")


def _cumulative(P: np.ndarray) -> np.ndarray:
    cum = np.cumsum(P, axis=1)
    # pin everything from the last positive entry on to exactly 1 so a
    # uniform draw can never land on a trailing zero-probability node
    for i in range(P.shape[0]):
        last = np.flatnonzero(P[i] > 0)[-1]
        cum[i, last:] = 1.0
    return cum


@dataclass(frozen=True, eq=False)
class StochasticGraph:
    """Row-stochastic transition matrix of a stationary Markov chain."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ValueError("transition matrix must be square and nonempty")
        _check_rows(P, ROW_TOL, "transition matrix")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_weights(cls, W) -> "StochasticGraph":
        """Normalize nonnegative weights row-wise; empty rows become self-loops."""
        W = np.array(W, dtype=float)
        if (W < 0).any():
            raise ValueError("weights must be nonnegative")
        empty = W.sum(axis=1) <= 0
        W[empty, empty.nonzero()[0]] = 1.0
        return cls(W / W.sum(axis=1, keepdims=True))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @cached_property
    def cum(self) -> np.ndarray:
        return _cumulative(self.P)

    @cached_property
    def adjacency(self) -> np.ndarray:
        return self.P > 0

    def is_strongly_connected(self) -> bool:
        return bool(reaching(self.adjacency, [0]).all() and reachable_from(self.adjacency, 0).all())


@dataclass(frozen=True)
class SamplePath:
    states: np.ndarray
    seed: object = None

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP with a dense ``(n, A, n)`` kernel.

    ``valid[i, a]`` marks the actions available at ``i``.  A *passive*
    state has an empty action set; its forced transition row is stored
    as action 0 and ``actions(i)`` reports no actions for it.
    """

    P: np.ndarray
    valid: np.ndarray
    unsafe: tuple[int, ...] = ()
    passive: np.ndarray | None = None
    grid: tuple[int, int] | None = None
    labels: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        valid = np.array(self.valid, dtype=bool)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or valid.shape != P.shape[:2]:
            raise ValueError("kernel must have shape (n, A, n) with valid of shape (n, A)")
        n = P.shape[0]
        passive = np.zeros(n, bool) if self.passive is None else np.array(self.passive, bool)
        if not valid.any(axis=1).all():
            raise ValueError("every state needs at least one row (an action or a passive row)")
        if passive.any() and (valid[passive, 1:].any() or not valid[passive, 0].all()):
            raise ValueError("passive states carry exactly one row, stored as action 0")
        P[~valid] = 0.0
        _check_rows(P[valid], 1e-9, "MDP kernel")
        for arr in (P, valid, passive):
            arr.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "passive", passive)
        object.__setattr__(self, "unsafe", node_set(self.unsafe, n))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Sequence[float]]], unsafe=(), passive=None, grid=None):
        """Build from ``rows[i][a]`` = distribution over next states.

        States listed in ``passive`` must have exactly one row.
        """
        n = len(rows)
        na = max(len(r) for r in rows)
        P = np.zeros((n, na, n))
        valid = np.zeros((n, na), bool)
        for i, acts in enumerate(rows):
            for a, row in enumerate(acts):
                P[i, a] = row
                valid[i, a] = True
        flags = np.zeros(n, bool)
        if passive is not None:
            flags[list(passive)] = True
        return cls(P, valid, unsafe=unsafe, passive=flags, grid=grid)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    def actions(self, i: int) -> list[int]:
        if self.passive[i]:
            return []
        return [int(a) for a in np.flatnonzero(self.valid[i])]

    def rows(self):
        """Yield ``(i, a)`` for every stored transition row, passive rows included."""
        for i, a in zip(*np.nonzero(self.valid)):
            yield int(i), int(a)

    def with_unsafe(self, unsafe) -> "Mdp":
        return Mdp(self.P, self.valid, unsafe=unsafe, passive=self.passive, grid=self.grid)

    def restrict(self, states, allowed=None) -> "Mdp":
        """Sub-MDP on ``states`` (reindexed in sorted order).

        ``allowed`` maps each kept state to the actions to keep; by default
        actions whose support leaves ``states`` are dropped.  Every kept state
        must retain an action.
        """
        states = list(node_set(states, self.n))
        keep = np.zeros(self.n, bool)
        keep[states] = True
        valid = np.zeros((len(states), self.n_actions), bool)
        for k, i in enumerate(states):
            acts = allowed[i] if allowed is not None else [
                a for a in range(self.n_actions)
                if self.valid[i, a] and not (self.P[i, a][~keep] > 0).any()
            ]
            valid[k, list(acts)] = True
        P = self.P[np.ix_(states, range(self.n_actions), states)].copy()
        if (np.abs(P[valid].sum(axis=1) - 1.0) > 1e-9).any():
            raise ValueError("restriction keeps an action whose support leaves the state set")
        pos = {s: k for k, s in enumerate(states)}
        unsafe = [pos[s] for s in self.unsafe if s in pos]
        return Mdp(P, valid, unsafe=unsafe, passive=self.passive[states])


@dataclass(frozen=True)
class Policy:
    """Stationary deterministic policy; ``choice[i]`` is the action at state ``i``."""

    choice: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(int(a) for a in self.choice))

    def validate(self, m: Mdp) -> None:
        if len(self.choice) != m.n:
            raise ValueError(f"policy covers {len(self.choice)} states, MDP has {m.n}")
        for i, a in enumerate(self.choice):
            if not m.passive[i] and not (0 <= a < m.n_actions and m.valid[i, a]):
                raise ValueError(f"action {a} is not available at state {i}")


def reaching(adj: np.ndarray, targets) -> np.ndarray:
    """Boolean mask of nodes with a directed path (length >= 0) into ``targets``."""
    n = adj.shape[0]
    mask = np.zeros(n, bool)
    queue = deque(int(t) for t in targets)
    mask[list(queue)] = True
    radj = adj.T
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(radj[j] & ~mask):
            mask[i] = True
            queue.append(i)
    return mask


def reachable_from(adj: np.ndarray, source: int) -> np.ndarray:
    return reaching(adj.T, [source])


def simulate_path(g: StochasticGraph, start: int, horizon: int, seed=None) -> SamplePath:
    """Simulate ``horizon`` steps from ``start``; returns ``horizon + 1`` states."""
    if not 0 <= start < g.n:
        raise ValueError(f"start node {start} out of range for n={g.n}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    U = np.random.default_rng(seed).random((1, horizon))
    states = _kernels.walk_paths(g.cum, np.array([start], np.int64), U)[0]
    return SamplePath(states, seed)


def path_streams(seed, n_paths: int) -> list[np.random.Generator]:
    """Independent generators, one per sample index, spawned from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_paths)]


def simulate_paths(g: StochasticGraph, start, horizon: int, n_paths: int, seed=None) -> np.ndarray:
    """Batch of independent paths, shape ``(n_paths, horizon + 1)``.

    ``start`` is a node or a distribution.  Path ``p`` uses stream ``p``
    of ``path_streams(seed, n_paths)``, so results do not depend on how
    the batch is scheduled.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    streams = path_streams(seed, n_paths)
    if np.isscalar(start):
        starts = np.full(n_paths, int(start), np.int64)
        if not 0 <= int(start) < g.n:
            raise ValueError(f"start node {start} out of range for n={g.n}")
        U = np.stack([r.random(horizon) for r in streams])
    else:
        pi = as_distribution(start, g.n)
        cum0 = _cumulative(pi[None, :])[0]
        draws = np.stack([r.random(horizon + 1) for r in streams])
        starts = np.minimum(np.searchsorted(cum0, draws[:, 0], side="right"), g.n - 1).astype(np.int64)
        U = np.ascontiguousarray(draws[:, 1:])
    return _kernels.walk_paths(g.cum, starts, U)


def stationary_distribution(g: StochasticGraph, tol: float = 1e-12, max_squarings: int = 80) -> np.ndarray:
    """Limit distribution of an ergodic chain, by repeated squaring of ``P``.

    Raises :class:`NotErgodicError` when ``P^(2^k)`` does not settle to a
    rank-one matrix (periodic or multi-class chains).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = g.P.copy()
    for _ in range(max_squarings):
        M2 = M @ M
        M2 /= M2.sum(axis=1, keepdims=True)
        settled = np.abs(M2 - M).max() <= tol
        M = M2
        if settled:
            break
    else:
        raise NotErgodicError("P^k did not converge; chain is periodic or not ergodic")
    if np.abs(M - M[0]).max() > 1e3 * tol + 1e-9:
        raise NotErgodicError("P^k converged to a matrix with distinct rows; chain has several recurrent classes")
    pi = M.mean(axis=0)
    for _ in range(50):
        pi = pi @ g.P
        pi /= pi.sum()
        if np.abs(pi @ g.P - pi).max() <= tol:
            return pi
    raise NotErgodicError(f"stationary residual above tol={tol}")


def stationary_linear(g: StochasticGraph) -> np.ndarray:
    """Stationary distribution of an irreducible (possibly periodic) chain by a linear solve."""
    n = g.n
    A = np.vstack([(g.P.T - np.eye(n)), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.abs(pi @ g.P - pi).max() > 1e-9 or (pi < -1e-12).any():
        raise NotErgodicError("no unique stationary distribution")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


# ---------------------------------------------------------------- generators

def gen_erdos_renyi(n: int, p: float, seed=None) -> StochasticGraph:
    """Directed G(n, p) with uniform rows over out-neighbours.

    Nodes without out-edges get a self-loop.
    """
    if n < 2 or not 0 < p <= 1:
        raise ValueError("need n >= 2 and 0 < p <= 1")
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return StochasticGraph.from_weights(adj.astype(float))


def gen_lattice_mdp(rows: int, cols: int, p_c: float) -> Mdp:
    """Grid world with actions up/down/left/right.

    The intended move happens with probability ``p_c``; otherwise a
    direction is drawn uniformly from all four.  Mass assigned to a move
    that would leave the grid is spread uniformly over the feasible moves.
    State ``(r, c)`` has index ``r * cols + c`` with row 0 on top.
    """
    if rows < 2 or cols < 2 or not 0 < p_c <= 1:
        raise ValueError("need rows, cols >= 2 and 0 < p_c <= 1")
    n = rows * cols
    P = np.zeros((n, 4, n))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            targets = []
            for dr, dc in _LATTICE_STEPS:
                rr, cc = r + dr, c + dc
                targets.append(rr * cols + cc if 0 <= rr < rows and 0 <= cc < cols else None)
            feasible = [t for t in targets if t is not None]
            for a in range(4):
                mass = np.full(4, (1.0 - p_c) / 4.0)
                mass[a] += p_c
                spill = 0.0
                for d, t in enumerate(targets):
                    if t is None:
                        spill += mass[d]
                    else:
                        P[i, a, t] += mass[d]
                for t in feasible:
                    P[i, a, t] += spill / len(feasible)
    P /= P.sum(axis=2, keepdims=True)
    return Mdp(P, np.ones((n, 4), bool), grid=(rows, cols))


def gen_random_mdp(n: int, seed=None, n_actions: int = 4) -> Mdp:
    """Each ``P(i, a, .)`` drawn uniformly from the simplex (normalized exponentials)."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    E = rng.exponential(size=(n, n_actions, n))
    return Mdp(E / E.sum(axis=2, keepdims=True), np.ones((n, n_actions), bool))
