"""ACPC target selection through polytope emptiness, and the hitting-time analogue.

For a target set ``S`` and level ``lam`` the polytope

    P(lam, S) = {h : h_i - sum_j P(i,a,j) h_j <= 1 - lam 1{i in S}} with |h|_inf <= zeta

has empty interior once some policy visits ``S`` at least every ``lam``
steps.  Greedy selection ranks candidates by the fraction of a fixed
sample of the ``S``-free body that survives in ``P(lam, S)``; emptiness
itself is decided by a max-margin LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import InfeasibleError, UnboundedError, UnreachableError
from .graph import Mdp, node_set
from .lp import solve_lp
from .mdp import acpc_optimal, min_hitting_time_vi
from .submodular import GreedyReport, greedy_min_cover

EMPTY_TOL = 1e-9
THETA = 1e6


@dataclass(frozen=True, eq=False)
class HalfspacePolytope:
    A: np.ndarray
    b: np.ndarray
    box: float

    def __post_init__(self):
        if self.box <= 0:
            raise ValueError("box half-width must be positive")
        A = np.atleast_2d(np.asarray(self.A, float))
        b = np.asarray(self.b, float).ravel()
        if A.shape[0] != b.size:
            raise ValueError("A and b disagree on the number of rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, H) -> np.ndarray:
        H = np.atleast_2d(H)
        inside = (H @ self.A.T <= self.b + 1e-12).all(axis=1)
        return inside & (np.abs(H) <= self.box).all(axis=1)


def acpc_matrix(m: Mdp) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``e_i - P(i,a,.)`` for every stored row, and the state of each row."""
    rows, owner = [], []
    for i, a in m.rows():
        r = -m.P[i, a].copy()
        r[i] += 1.0
        rows.append(r)
        owner.append(i)
    return np.array(rows), np.array(owner)


def build_acpc_polytope(m: Mdp, S, lam: float, zeta: float) -> HalfspacePolytope:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    S = node_set(S, m.n)
    A, owner = acpc_matrix(m)
    b = np.where(np.isin(owner, S), 1.0 - lam, 1.0)
    return HalfspacePolytope(A, b, zeta)


def max_margin(p: HalfspacePolytope) -> float:
    """``max t`` subject to ``A h + t <= b`` and the box, with ``t`` capped at 1."""
    n = p.dim
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([p.A, np.ones((p.A.shape[0], 1))])
    bounds = [(-p.box, p.box)] * n + [(None, 1.0)]
    try:
        res = solve_lp(c, A_ub, p.b, bounds=bounds)
    except InfeasibleError:  # cannot happen with t free below, kept for clarity
        return -np.inf
    return -res.value


def polytope_empty_interior(p: HalfspacePolytope, tol: float = EMPTY_TOL) -> bool:
    return max_margin(p) <= tol


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    half_width: float
    fraction: float
    samples: int


def volume_estimate(p: HalfspacePolytope, n_samples: int, seed=None) -> VolumeEstimate:
    """Box volume times the fraction of uniform box samples inside ``A h <= b``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    H = rng.uniform(-p.box, p.box, size=(n_samples, p.dim))
    inside = (H @ p.A.T <= p.b).all(axis=1)
    frac = inside.mean()
    vol = (2.0 * p.box) ** p.dim
    hw = 1.96 * np.sqrt(frac * (1 - frac) / n_samples) * vol
    return VolumeEstimate(float(vol * frac), float(hw), float(frac), n_samples)


# -------------------------------------------------------- shared body samples

class BodySample:
    """Hit-and-run sample of ``{h : A h <= 1, |h|_inf <= zeta, sum(h) = 0}``.

    ``A 1 = 0`` makes every ``P(lam, S)`` invariant along the all-ones
    direction, so the sampler walks the zero-sum slice.  The sample does
    not depend on ``lam`` or ``S``; each level only changes which rows are
    violated.  ``row_max[l, i]`` is ``max_a (A h_l)_{(i,a)}``.
    """

    def __init__(self, m: Mdp, zeta: float, n_samples: int, seed=None, thin: int | None = None,
                 burn_in: int | None = None):
        self.n = m.n
        self.zeta = float(zeta)
        A, owner = acpc_matrix(m)
        thin = thin or max(2, m.n)
        burn_in = burn_in if burn_in is not None else 20 * m.n
        rng = np.random.default_rng(seed)
        steps = burn_in + n_samples * thin
        D = rng.standard_normal((steps, m.n))
        D -= D.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(D, axis=1, keepdims=True)
        D = np.divide(D, norms, out=np.zeros_like(D), where=norms > 0)
        U = rng.random(steps)
        lo = np.full(m.n, -zeta)
        hi = np.full(m.n, zeta)
        out = _kernels.hit_and_run(np.ascontiguousarray(A), np.ones(len(A)), lo, hi,
                                   np.zeros(m.n), D, U, thin)
        self.samples = out[-n_samples:]
        vals = self.samples @ A.T
        self.row_max = np.full((n_samples, m.n), -np.inf)
        for i in range(m.n):
            cols = owner == i
            if cols.any():
                self.row_max[:, i] = vals[:, cols].max(axis=1)

    def blockers(self, lam: float) -> np.ndarray:
        """``B[l, i]``: sample ``l`` leaves ``P(lam, S)`` whenever ``i`` is in ``S``."""
        return self.row_max > 1.0 - lam

    def fraction(self, S, lam: float) -> float:
        S = list(S)
        if not S:
            return 1.0
        return float((~self.blockers(lam)[:, S].any(axis=1)).mean())


def r_lambda(m: Mdp, S, lam: float, zeta: float | None = None, n_samples: int = 2000, seed=None,
             sample: BodySample | None = None) -> float:
    """Fraction of the shared body sample lying in ``P(lam, S)``.

    Pass ``sample`` to evaluate many sets and levels on the same points.
    """
    zeta = 10.0 * m.n if zeta is None else zeta
    sample = sample or BodySample(m, zeta, n_samples, seed)
    return sample.fraction(node_set(S, m.n), lam)


# ------------------------------------------------------------ selection loop

@dataclass
class AcpcSelection:
    chosen: tuple[int, ...]
    lambda_hat: float
    certificate: float
    greedy_report: GreedyReport | None
    lambda_max: float = float("nan")
    lambda_min: float = 0.0
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class AcpcConfig:
    zeta: float | None = None
    n_samples: int = 2000
    seed: int | None = 0
    oracle_tol: float = 1e-8
    empty_tol: float = EMPTY_TOL


def greedy_cover_at(m: Mdp, lam: float, zeta: float, sample: BodySample, ground=None,
                    max_size: int | None = None, empty_tol: float = EMPTY_TOL) -> GreedyReport:
    """Greedy cover of ``r_lam``: MC fraction, then LP margin, then index."""
    ground = list(range(m.n)) if ground is None else list(ground)
    margins: dict = {}

    def margin(S):
        if S not in margins:
            margins[S] = max_margin(build_acpc_polytope(m, S, lam, zeta))
        return margins[S]

    f = lambda S: sample.fraction(S, lam)
    done = lambda S: margin(S) <= empty_tol
    try:
        return greedy_min_cover(f, ground, 0.0, confirm=1, tiebreak=margin, done=done, max_size=max_size)
    except InfeasibleError:
        return GreedyReport(tuple(ground), [], float("inf"), 0, f(tuple(ground)), {"complete": False})


def lambda_upper(m: Mdp, ground=None, tol: float = 1e-8) -> float:
    """Largest optimal ACPC over singleton targets (the bisection's upper end)."""
    ground = range(m.n) if ground is None else ground
    return max(acpc_optimal(m, [v], tol=tol).lam for v in ground)


def min_acpc_select(m: Mdp, k: int, delta: float = 0.05, cfg: AcpcConfig | None = None,
                    sample: BodySample | None = None) -> AcpcSelection:
    """Bisection on ``lam`` with a greedy cover of ``r_lam`` at each level.

    A level is accepted when the greedy cover needs at most ``k`` states.
    The returned set is the cover at the last accepted level and the
    certificate is its optimal ACPC from :func:`acpc_optimal`.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cfg = cfg or AcpcConfig()
    zeta = 10.0 * m.n if cfg.zeta is None else cfg.zeta
    sample = sample or BodySample(m, zeta, cfg.n_samples, cfg.seed)
    hi = lambda_upper(m, tol=cfg.oracle_tol)
    lam_max = hi
    lo = 0.0
    best = greedy_cover_at(m, hi, zeta, sample, max_size=k, empty_tol=cfg.empty_tol)
    history = [(hi, len(best.chosen), best.meta.get("complete", True))]
    if not best.meta.get("complete", True) or len(best.chosen) > k:
        raise UnreachableError(f"no {k}-set reaches the empty-polytope level at lambda_max={hi}")
    while hi - lo > delta:
        lam = 0.5 * (lo + hi)
        rep = greedy_cover_at(m, lam, zeta, sample, max_size=k, empty_tol=cfg.empty_tol)
        ok = rep.meta.get("complete", True) and len(rep.chosen) <= k
        history.append((lam, len(rep.chosen), ok))
        if ok:
            hi, best = lam, rep
        else:
            lo = lam
    cert = acpc_optimal(m, best.chosen, tol=cfg.oracle_tol).lam
    return AcpcSelection(best.chosen, hi, cert, best, lam_max, lo, history)


def min_cover_size(m: Mdp, lam: float, cfg: AcpcConfig | None = None,
                   sample: BodySample | None = None) -> GreedyReport:
    """Full greedy cover at a fixed level (no budget), for size-versus-level curves."""
    cfg = cfg or AcpcConfig()
    zeta = 10.0 * m.n if cfg.zeta is None else cfg.zeta
    sample = sample or BodySample(m, zeta, cfg.n_samples, cfg.seed)
    return greedy_cover_at(m, lam, zeta, sample, empty_tol=cfg.empty_tol)


# ------------------------------------------------------ hitting-time variant

def chi_indicator(v, S, m: Mdp, theta: float = THETA) -> int:
    """1 iff ``v_i + theta 1{i in S} v_i <= 1 + sum_j P(i,a,j) v_j`` for every row."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    v = np.asarray(v, float)
    S = node_set(S, m.n)
    scale = np.ones(m.n)
    scale[list(S)] += theta
    for i, a in m.rows():
        if scale[i] * v[i] > 1.0 + m.P[i, a] @ v + 1e-12:
            return 0
    return 1


class ChiSample:
    """Uniform points of ``[0, v_max]^n`` with coordinate sum at least ``zeta_level``.

    For each point, ``base[l]`` records whether the ``S``-free rows hold and
    ``blocked[l, i]`` whether state ``i`` would break its row once in ``S``.
    """

    def __init__(self, m: Mdp, zeta_level: float, v_max: float, n_samples: int, seed=None,
                 theta: float = THETA):
        rng = np.random.default_rng(seed)
        got, tries = [], 0
        while sum(len(g) for g in got) < n_samples:
            V = rng.uniform(0.0, v_max, size=(max(n_samples, 256), m.n))
            got.append(V[V.sum(axis=1) >= zeta_level])
            tries += 1
            if tries > 1000:
                raise ValueError("sum constraint leaves (almost) no volume in the box")
        self.samples = np.vstack(got)[:n_samples]
        nxt = np.einsum("iaj,lj->lia", m.P, self.samples)
        rhs = np.where(m.valid[None], 1.0 + nxt, np.inf).min(axis=2)
        self.base = (self.samples <= rhs + 1e-12).all(axis=1)
        self.blocked = (1.0 + theta) * self.samples > rhs + 1e-12

    def fraction(self, S) -> float:
        S = list(S)
        ok = self.base.copy()
        if S:
            ok &= ~self.blocked[:, S].any(axis=1)
        return float(ok.mean())


def chi_integral(m: Mdp, S, zeta_level: float, v_max: float | None = None, n_samples: int = 2000,
                 seed=None, sample: ChiSample | None = None) -> float:
    """Fraction of the shared sample with ``chi_v(S) = 1``."""
    v_max = 2.0 * zeta_level if v_max is None else v_max
    sample = sample or ChiSample(m, zeta_level, v_max, n_samples, seed)
    return sample.fraction(node_set(S, m.n))


def hitting_lp_value(m: Mdp, S) -> float:
    """``max sum(v)`` over ``v_i <= 1 + P(i,a,.) v``, ``v_S = 0``; ``inf`` if unbounded."""
    S = node_set(S, m.n)
    A, owner = acpc_matrix(m)
    keep = ~np.isin(owner, S)
    bounds = [(0.0, 0.0) if i in S else (0.0, None) for i in range(m.n)]
    try:
        res = solve_lp(-np.ones(m.n), A[keep] if keep.any() else None,
                       np.ones(keep.sum()) if keep.any() else None, bounds=bounds)
    except UnboundedError:
        return np.inf
    return -res.value


@dataclass
class HittingSelection:
    chosen: tuple[int, ...]
    zeta_hat: float
    certificate: float
    greedy_report: GreedyReport | None
    history: list = field(default_factory=list)


def min_hitting_select(m: Mdp, k: int, delta: float = 0.05, n_samples: int = 1000, seed=0,
                       theta: float = THETA) -> HittingSelection:
    """Bisection on the level ``zeta`` of the summed optimal hitting time.

    Candidates are ranked by the sampled ``chi`` fraction, then by the LP
    value; a level is covered once the LP value drops to ``zeta``.  The
    certificate is ``sum_i Hbar(i, S)`` from value iteration.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ground = list(range(m.n))
    lp = lru_cache(maxsize=None)(lambda S: hitting_lp_value(m, S))
    singles = [lp((v,)) for v in ground]
    finite = [s for s in singles if np.isfinite(s)]
    if not finite:
        raise UnreachableError("no single state is reached almost surely from every state")
    hi, lo = max(finite), 0.0

    def cover(zeta):
        sample = ChiSample(m, zeta, 2.0 * max(zeta, 1.0), n_samples, seed, theta) if zeta > 0 else None
        f = (lambda S: sample.fraction(S)) if sample else (lambda S: 0.0)
        try:
            return greedy_min_cover(f, ground, 0.0, confirm=1, tiebreak=lp,
                                    done=lambda S: lp(S) <= zeta + 1e-9, max_size=k)
        except InfeasibleError:
            return GreedyReport(tuple(ground), [], float("inf"), 0, f(tuple(ground)), {"complete": False})

    best = cover(hi)
    history = [(hi, len(best.chosen), best.meta.get("complete", True))]
    while hi - lo > delta:
        zeta = 0.5 * (lo + hi)
        rep = cover(zeta)
        ok = rep.meta.get("complete", True) and len(rep.chosen) <= k
        history.append((zeta, len(rep.chosen), ok))
        if ok:
            hi, best = zeta, rep
        else:
            lo = zeta
    cert = float(min_hitting_time_vi(m, best.chosen).values.sum())
    return HittingSelection(best.chosen, hi, cert, best, history)
