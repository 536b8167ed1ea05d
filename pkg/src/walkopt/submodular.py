"""Greedy set-function optimization, matroids, and exact submodular minimization.

Set functions are plain callables taking a tuple of sorted node indices.
Ties are always broken toward the lowest node index.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InfeasibleError, SizeGuardError

SetFunction = Callable[[tuple], float]

APRIORI_MAX = 1.0 - 1.0 / math.e


class EvaluationError(RuntimeError):
    def __init__(self, S, cause):
        super().__init__(f"set function failed on {S}: {cause!r}")
        self.set = S
        self.cause = cause


@dataclass
class GreedyReport:
    chosen: tuple[int, ...]
    trace: list[tuple[int, float]]
    bound: float
    evaluations: int
    value: float = float("nan")
    meta: dict = field(default_factory=dict)


class _Counter:
    """Wraps a set function, counting calls and attaching the set to failures."""

    def __init__(self, f: SetFunction):
        self.f = f
        self.calls = 0

    def __call__(self, S) -> float:
        S = tuple(sorted(S))
        self.calls += 1
        try:
            return float(self.f(S))
        except Exception as exc:
            raise EvaluationError(S, exc) from exc


def _ground(ground: Iterable[int]) -> list[int]:
    return sorted({int(v) for v in ground})


# ------------------------------------------------------------------ greedy max

def greedy_max_cardinality(f: SetFunction, ground, k: int, lazy: bool = False) -> GreedyReport:
    """Pick ``k`` elements, each maximizing the marginal gain of ``f``.

    The report's ``bound`` is the a-priori factor ``1 - 1/e`` that applies
    when ``f`` is monotone submodular.
    """
    ground = _ground(ground)
    if not 0 <= k <= len(ground):
        raise ValueError(f"k={k} must lie in [0, {len(ground)}]")
    return _greedy_max(f, ground, k, lambda S, v: True, lazy, APRIORI_MAX)


def _greedy_max(f, ground, k, feasible, lazy, bound) -> GreedyReport:
    F = _Counter(f)
    S: list[int] = []
    base = F(S)
    trace = []
    heap = [(-math.inf, v) for v in ground] if lazy else None
    while len(S) < k:
        if lazy:
            pick = _lazy_pick(F, S, base, heap, feasible)
        else:
            pick = None
            for v in ground:
                if v in S or not feasible(S, v):
                    continue
                gain = F(S + [v]) - base
                if pick is None or gain > pick[1]:
                    pick = (v, gain)
        if pick is None:
            break
        S.append(pick[0])
        base += pick[1]
        trace.append(pick)
    return GreedyReport(tuple(sorted(S)), trace, bound, F.calls, base)


def _lazy_pick(F, S, base, heap, feasible, tol=1e-9):
    # heap entries are (-gain, v); gains from earlier rounds are upper bounds.
    # A fresh top is accepted once no stale bound comes within tol of it, so
    # rounding in an old bound cannot beat a lower-index exact tie.
    fresh = {}
    skipped = []
    pick = None
    while heap:
        neg, v = heapq.heappop(heap)
        if not feasible(S, v):
            skipped.append((neg, v))
            continue
        if v in fresh:
            close = [e for e in heap if e[1] not in fresh and -e[0] >= fresh[v] - tol and feasible(S, e[1])]
            if not close:
                pick = (v, fresh[v])
                break
            heapq.heappush(heap, (neg, v))
            for e in close:
                heap.remove(e)
            heapq.heapify(heap)
            for _, w in close:
                fresh[w] = F(S + [w]) - base
                heapq.heappush(heap, (-fresh[w], w))
            continue
        fresh[v] = F(S + [v]) - base
        heapq.heappush(heap, (-fresh[v], v))
    for e in skipped:
        heapq.heappush(heap, e)
    return pick


# ------------------------------------------------------------------ greedy cover

def wolsey_ratio(f_empty: float, f_ground: float, f_penultimate: float) -> float:
    """``1 + log((f(V) - f(empty)) / (f(V) - f(S_{T-1})))`` for nonincreasing ``f``."""
    num = f_empty - f_ground
    den = f_penultimate - f_ground
    if num <= 0:
        return 1.0
    if den <= 0:
        return math.inf
    return 1.0 + math.log(num / den)


def greedy_min_cover(f: SetFunction, ground, target: float = 0.0, confirm: int = 3,
                     tiebreak: SetFunction | None = None,
                     done: Callable[[tuple], bool] | None = None,
                     max_size: int | None = None) -> GreedyReport:
    """Grow ``S`` greedily (argmin of ``f(S + v)``) until the cover test passes.

    The cover test is ``f(S) <= target`` repeated ``confirm`` times (guards
    against noisy estimators), or ``done(S)`` when given.  ``tiebreak`` ranks
    candidates with equal ``f``; remaining ties go to the lowest index.
    ``max_size`` stops the loop early and marks the report as incomplete.
    """
    ground = _ground(ground)
    F = _Counter(f)
    if confirm < 1:
        raise ValueError("confirm must be >= 1")

    def covered(S):
        if done is not None:
            return bool(done(tuple(sorted(S))))
        return all(F(S) <= target for _ in range(confirm))

    S: list[int] = []
    trace = []
    values = [None]
    if covered(S):
        return GreedyReport((), [], 1.0, F.calls, F(S), {"complete": True})
    f_ground = F(ground)
    if done is None and f_ground > target:
        raise InfeasibleError(f"cover target {target} unreachable: f(ground) = {f_ground}")
    if done is not None and not done(tuple(ground)):
        raise InfeasibleError(f"cover test fails on the whole ground set (f(ground) = {f_ground})")
    values[0] = F(S)
    complete = True
    while True:
        scored = [(F(S + [v]), v) for v in ground if v not in S]
        low = min(val for val, _ in scored)
        tied = [v for val, v in scored if val == low]
        if tiebreak is not None and len(tied) > 1:
            best = min((low, tiebreak(tuple(sorted(S + [v]))), v) for v in tied)
        else:
            best = (low, 0.0, tied[0])
        S.append(best[2])
        trace.append((best[2], best[0]))
        values.append(best[0])
        if covered(S):
            break
        if max_size is not None and len(S) >= max_size:
            complete = False
            break
    f_pen = values[-2]
    bound = wolsey_ratio(values[0], f_ground, f_pen)
    meta = {"complete": complete, "f_empty": values[0], "f_ground": f_ground, "f_penultimate": f_pen}
    return GreedyReport(tuple(sorted(S)), trace, bound, F.calls, values[-1], meta)


# --------------------------------------------------------------------- matroids

class Matroid:
    def is_independent(self, S) -> bool:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Matroid):
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("uniform matroid rank must be >= 0")

    def is_independent(self, S) -> bool:
        return len(set(S)) <= self.k


@dataclass(frozen=True)
class Partition(Matroid):
    """At most one element per block; elements outside every block are unconstrained."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(set(b))) for b in self.blocks)
        seen = set()
        for b in blocks:
            if seen & set(b):
                raise ValueError("partition blocks must be pairwise disjoint")
            seen |= set(b)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "_where", {v: i for i, b in enumerate(blocks) for v in b})

    def is_independent(self, S) -> bool:
        used = set()
        for v in set(S):
            b = self._where.get(v)
            if b is None:
                continue
            if b in used:
                return False
            used.add(b)
        return True


@dataclass(frozen=True)
class Union(Matroid):
    """``S`` is independent iff it splits into independent sets of the two factors."""

    left: Matroid
    right: Matroid

    def factors(self) -> list[Matroid]:
        out = []
        for m in (self.left, self.right):
            out.extend(m.factors() if isinstance(m, Union) else [m])
        return out

    def is_independent(self, S) -> bool:
        return matroid_partition(self.factors(), S) is not None


def is_independent(m: Matroid, S) -> bool:
    return m.is_independent(tuple(S))


def matroid_partition(factors: Sequence[Matroid], S) -> list[set] | None:
    """Split ``S`` into sets independent in the respective factors, or ``None``.

    Elements are inserted one at a time along shortest exchange paths
    (matroid partition augmentation), which keeps every part independent.
    """
    parts: list[set] = [set() for _ in factors]
    owner: dict = {}
    for x in sorted(set(S)):
        # BFS over elements; edge y -> z (z in part i) if part_i - z + y independent
        prev = {x: None}
        queue = deque([x])
        found = None
        while queue and found is None:
            y = queue.popleft()
            for i, m in enumerate(factors):
                if owner.get(y) == i:
                    continue
                if m.is_independent(parts[i] | {y}):
                    found = (y, i)
                    break
                for z in sorted(parts[i]):
                    if z not in prev and m.is_independent((parts[i] - {z}) | {y}):
                        prev[z] = (y, i)
                        queue.append(z)
        if found is None:
            return None
        y, i = found
        while True:
            old = owner.get(y)
            if old is not None:
                parts[old].discard(y)
            parts[i].add(y)
            owner[y] = i
            link = prev[y]
            if link is None:
                break
            # y took z's old slot: y's predecessor moves into y's old part
            y, i = link[0], old
    return parts


def independent_sets(m: Matroid, ground, max_size: int | None = None):
    ground = _ground(ground)
    top = len(ground) if max_size is None else max_size
    for r in range(top + 1):
        for S in itertools.combinations(ground, r):
            if m.is_independent(S):
                yield S


def bases(m: Matroid, ground) -> list[tuple]:
    """All maximal independent subsets of ``ground`` (enumeration; small ground sets only)."""
    ground = _ground(ground)
    if len(ground) > 20:
        raise SizeGuardError("basis enumeration limited to 20 elements")
    indep = list(independent_sets(m, ground))
    r = max(len(S) for S in indep)
    return [S for S in indep if len(S) == r]


def greedy_matroid(f: SetFunction, m: Matroid, ground, lazy: bool = False) -> GreedyReport:
    """Greedy maximization over feasible augmentations until no element fits."""
    ground = _ground(ground)
    feasible = lambda S, v: m.is_independent(tuple(S) + (v,))
    return _greedy_max(f, ground, len(ground), feasible, lazy, 0.5)


def min_weight_basis(weights, m: Matroid, ground) -> tuple[int, ...]:
    """Basis minimizing total weight (matroid greedy on ascending weights, low index first)."""
    ground = _ground(ground)
    w = np.asarray(weights, float)
    S: list[int] = []
    for v in sorted(ground, key=lambda v: (w[v], v)):
        if m.is_independent(tuple(S) + (v,)):
            S.append(v)
    return tuple(sorted(S))


# -------------------------------------------------------- diminishing returns

@dataclass(frozen=True)
class Violation:
    S: tuple
    T: tuple
    v: int
    gain_small: float
    gain_large: float


def check_diminishing_returns(f: SetFunction, ground, trials: int, direction: str = "sub",
                              seed=None, tol: float = 1e-9) -> list[Violation]:
    """Sample chains ``S <= T``, ``v`` outside ``T``, and collect violations.

    ``direction="sub"`` tests ``f(S+v) - f(S) >= f(T+v) - f(T)``;
    ``"super"`` tests the reverse inequality.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if direction not in ("sub", "super"):
        raise ValueError("direction must be 'sub' or 'super'")
    ground = _ground(ground)
    if len(ground) < 1:
        return []
    rng = np.random.default_rng(seed)
    out = []
    for S, T, v in sample_chains(ground, trials, rng):
        gs = f(tuple(sorted(S + (v,)))) - f(S)
        gt = f(tuple(sorted(T + (v,)))) - f(T)
        bad = gs < gt - tol if direction == "sub" else gs > gt + tol
        if bad:
            out.append(Violation(S, T, v, float(gs), float(gt)))
    return out


def sample_chains(ground, trials: int, rng):
    """Yield ``(S, T, v)`` with ``S`` a subset of ``T`` and ``v`` not in ``T``."""
    ground = np.asarray(_ground(ground))
    n = len(ground)
    for _ in range(trials):
        perm = rng.permutation(ground)
        v = int(perm[0])
        t = int(rng.integers(0, n))
        s = int(rng.integers(0, t + 1))
        T = tuple(sorted(int(x) for x in perm[1:1 + t]))
        S = tuple(sorted(int(x) for x in rng.choice(T, size=s, replace=False))) if s else ()
        yield S, T, v


# ------------------------------------------------- exact submodular minimization

def _greedy_vertex(f, ground, order_weights, f_empty):
    # vertex of the base polytope of f - f(empty) minimizing <w, q>
    order = sorted(range(len(ground)), key=lambda i: (order_weights[i], i))
    q = np.empty(len(ground))
    prev = f_empty
    prefix = []
    for i in order:
        prefix.append(ground[i])
        val = f(tuple(sorted(prefix)))
        q[i] = val - prev
        prev = val
    return q


def _affine_min(B):
    # min ||B a|| with sum(a) = 1
    k = B.shape[1]
    G = B.T @ B
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = G
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


@dataclass(frozen=True)
class SfmResult:
    minimizer: tuple[int, ...]
    value: float
    min_norm_point: np.ndarray
    iterations: int


def minimize_submodular(f: SetFunction, ground, tol: float = 1e-9, max_iter: int = 2000) -> SfmResult:
    """Exact minimizer of a submodular ``f`` via the minimum-norm base point.

    The minimizer is read off the level sets of the min-norm point; every
    level set is evaluated and the best one returned, which makes the
    answer robust to the point being slightly inexact.
    """
    ground = _ground(ground)
    n = len(ground)
    if n == 0:
        return SfmResult((), float(f(())), np.zeros(0), 0)
    cache = {}

    def F(S):
        if S not in cache:
            cache[S] = float(f(S))
        return cache[S]

    f0 = F(())
    x = _greedy_vertex(F, ground, np.zeros(n), f0)
    pts = [x]
    lam = np.array([1.0])
    it = 0
    for it in range(1, max_iter + 1):
        q = _greedy_vertex(F, ground, x, f0)
        scale = max(1.0, float(np.abs(x).max()))
        if x @ x - x @ q <= tol * scale * scale:
            break
        if any(np.allclose(q, p, atol=1e-14) for p in pts):
            break
        pts.append(q)
        lam = np.append(lam, 0.0)
        while True:
            B = np.column_stack(pts)
            alpha = _affine_min(B)
            if (alpha > 1e-12).all():
                lam = alpha
                x = B @ lam
                break
            idx = np.flatnonzero(alpha <= 1e-12)
            den = lam[idx] - alpha[idx]
            ratio = np.divide(lam[idx], den, out=np.zeros(idx.size), where=den > 0)
            theta = min(float(ratio.min()), 1.0)
            lam = theta * alpha + (1 - theta) * lam
            lam[idx[np.argmin(ratio)]] = 0.0  # at least one point leaves per minor cycle
            keep = lam > 1e-12
            if not keep.any():
                keep[np.argmax(alpha)] = True
                lam = keep.astype(float)
            pts = [p for p, kk in zip(pts, keep) if kk]
            lam = lam[keep] / lam[keep].sum()
            x = np.column_stack(pts) @ lam
    order = np.argsort(x, kind="stable")
    best_set, best_val = (), f0
    prefix = []
    for i in order:
        prefix.append(ground[i])
        S = tuple(sorted(prefix))
        val = F(S)
        if val < best_val - 1e-12:
            best_set, best_val = S, val
    return SfmResult(best_set, best_val, x, it)


def brute_force_min(f: SetFunction, ground, max_size: int | None = None,
                    min_size: int = 0) -> tuple[tuple, float]:
    """Exhaustive minimum over subsets (ties: fewest elements, then lexicographic)."""
    ground = _ground(ground)
    if len(ground) > 20:
        raise SizeGuardError("exhaustive search limited to 20 elements")
    top = len(ground) if max_size is None else max_size
    best, best_val = None, math.inf
    for r in range(min_size, top + 1):
        for S in itertools.combinations(ground, r):
            val = f(S)
            if val < best_val:
                best, best_val = S, val
    return best, best_val


def descent_greedy(f: SetFunction, ground) -> GreedyReport:
    """Add the element with the most negative marginal until none improves."""
    ground = _ground(ground)
    F = _Counter(f)
    S: list[int] = []
    cur = F(S)
    trace = []
    while True:
        best = None
        for v in ground:
            if v in S:
                continue
            val = F(S + [v])
            if best is None or val < best[1]:
                best = (v, val)
        if best is None or best[1] >= cur:
            break
        S.append(best[0])
        trace.append((best[0], best[1] - cur))
        cur = best[1]
    return GreedyReport(tuple(sorted(S)), trace, math.nan, F.calls, cur)


def greedy_chain_min(f: SetFunction, ground) -> GreedyReport:
    """Grow ``S`` greedily through the whole ground set and return the best prefix.

    Unlike :func:`descent_greedy` this does not stop at the first step
    without improvement, so it can cross a plateau to a better larger set.
    """
    ground = _ground(ground)
    F = _Counter(f)
    S: list[int] = []
    best, best_val = (), F(S)
    trace = []
    while len(S) < len(ground):
        val, v = min((F(S + [v]), v) for v in ground if v not in S)
        S.append(v)
        trace.append((v, val))
        if val < best_val - 1e-12:
            best, best_val = tuple(sorted(S)), val
    return GreedyReport(best, trace, math.nan, F.calls, best_val)
