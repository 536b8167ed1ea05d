"""Joint selection: reach every accepting end component, then minimize the worst ACPC.

Each accepting maximal end component (AMEC) gets its own target set.  The
objective of a set ``S`` is the largest optimal ACPC over the AMECs, each
solved on the AMEC's own sub-MDP.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .acpc import (AcpcConfig, AcpcSelection, BodySample, build_acpc_polytope, greedy_cover_at,
                   lambda_upper, max_margin)
from .errors import BudgetWarning, InfeasibleError, SizeGuardError, UnreachableError
from .graph import Mdp, node_set
from .lp import solve_lp
from .mdp import EndComponent, acpc_optimal, amec_filter, mec_decomposition
from .submodular import Matroid, Partition, Uniform, Union, bases

ENUM_GUARD = 8


@dataclass(frozen=True, eq=False)
class JointInstance:
    mdp: Mdp
    R: tuple[int, ...]
    amecs: tuple[EndComponent, ...]
    k: int

    def __post_init__(self):
        R = node_set(self.R, self.mdp.n)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "amecs", tuple(self.amecs))
        seen: set = set()
        for ec in self.amecs:
            if seen & set(ec.states):
                raise ValueError("AMECs must be pairwise state-disjoint")
            if set(R) & set(ec.states):
                raise ValueError("an AMEC may not contain unsafe states")
            seen |= set(ec.states)
        if not self.amecs:
            raise ValueError("instance has no accepting end component")

    @classmethod
    def from_mdp(cls, m: Mdp, k: int, R=None) -> "JointInstance":
        R = m.unsafe if R is None else node_set(R, m.n)
        return cls(m, R, tuple(amec_filter(mec_decomposition(m), R)), k)

    @property
    def n_amecs(self) -> int:
        return len(self.amecs)

    @cached_property
    def sub_mdps(self) -> list[Mdp]:
        return [self.mdp.restrict(ec.states, ec.allowed) for ec in self.amecs]

    def localize(self, S, idx: int) -> tuple[int, ...]:
        """Positions of ``S``'s members inside AMEC ``idx``."""
        states = self.amecs[idx].states
        return tuple(states.index(v) for v in sorted(S) if v in states)

    def globalize(self, local, idx: int) -> tuple[int, ...]:
        states = self.amecs[idx].states
        return tuple(states[q] for q in local)


def joint_matroid(amecs, k: int) -> Matroid:
    """One state per AMEC, united with ``k - N`` free choices."""
    blocks = tuple(tuple(ec.states) for ec in amecs)
    N = len(blocks)
    if k < N:
        warnings.warn(f"budget k={k} is below the {N} AMECs; some AMEC cannot be reached",
                      BudgetWarning, stacklevel=2)
    return Union(Partition(blocks), Uniform(max(k - N, 0)))


def q_value(inst: JointInstance, S, tol: float = 1e-8) -> float:
    """Worst optimal ACPC over the AMECs; ``inf`` when ``S`` misses one."""
    worst = 0.0
    for idx, sub in enumerate(inst.sub_mdps):
        local = inst.localize(S, idx)
        if not local:
            return math.inf
        worst = max(worst, acpc_optimal(sub, local, tol=tol).lam)
    return worst


def _amec_ground(inst: JointInstance) -> list[int]:
    return sorted(v for ec in inst.amecs for v in ec.states)


def best_basis(inst: JointInstance, tol: float = 1e-8) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum of ``q`` over the bases of :func:`joint_matroid`."""
    ground = _amec_ground(inst)
    if len(ground) > ENUM_GUARD:
        raise SizeGuardError(f"basis enumeration limited to {ENUM_GUARD} AMEC states")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        mat = joint_matroid(inst.amecs, inst.k)
    scored = [(q_value(inst, B, tol), B) for B in bases(mat, ground)]
    val, B = min(scored)
    return B, val


def best_covering_set(inst: JointInstance, tol: float = 1e-8) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum of ``q`` over sets of at most ``k`` states meeting every AMEC."""
    ground = _amec_ground(inst)
    if len(ground) > ENUM_GUARD:
        raise SizeGuardError(f"set enumeration limited to {ENUM_GUARD} AMEC states")
    best = (math.inf, ())
    for r in range(1, min(inst.k, len(ground)) + 1):
        for S in itertools.combinations(ground, r):
            if all(set(S) & set(ec.states) for ec in inst.amecs):
                best = min(best, (q_value(inst, S, tol), S))
    return best[1], best[0]


# ------------------------------------------------------------ augmented MDP

def augmented_mdp(m: Mdp, amecs) -> Mdp:
    """Collapse each AMEC to one absorbing passive state ``l_m``.

    States are the non-AMEC states (in order) followed by ``l_1..l_N``;
    mass entering an AMEC is summed onto its ``l_m``.
    """
    amecs = list(amecs)
    member = np.full(m.n, -1)
    for q, ec in enumerate(amecs):
        if (member[list(ec.states)] >= 0).any():
            raise ValueError("AMECs must be pairwise state-disjoint")
        member[list(ec.states)] = q
    rest = np.flatnonzero(member < 0)
    N = len(amecs)
    n_new = rest.size + N
    P = np.zeros((n_new, m.n_actions, n_new))
    P[: rest.size, :, : rest.size] = m.P[np.ix_(rest, range(m.n_actions), rest)]
    for q, ec in enumerate(amecs):
        P[: rest.size, :, rest.size + q] = m.P[np.ix_(rest, range(m.n_actions), list(ec.states))].sum(axis=2)
        P[rest.size + q, 0, rest.size + q] = 1.0
    valid = np.zeros((n_new, m.n_actions), bool)
    valid[: rest.size] = m.valid[rest]
    valid[rest.size:, 0] = True
    passive = np.concatenate([m.passive[rest], np.ones(N, bool)])
    pos = {int(s): k for k, s in enumerate(rest)}
    unsafe = [pos[s] for s in m.unsafe if s in pos]
    labels = tuple(str(int(s)) for s in rest) + tuple(f"l{q + 1}" for q in range(N))
    return Mdp(P, valid, unsafe=unsafe, passive=passive, labels=labels)


# ------------------------------------------------------------- bisection loop

def _covers(inst: JointInstance, lam: float, samples, zetas, cfg: AcpcConfig):
    """Per-AMEC greedy covers at ``lam``; ``None`` when some AMEC cannot be covered."""
    budget = inst.k - (inst.n_amecs - 1)
    reps = []
    for sub, smp, zeta in zip(inst.sub_mdps, samples, zetas):
        rep = greedy_cover_at(sub, lam, zeta, smp, max_size=budget, empty_tol=cfg.empty_tol)
        if not rep.meta.get("complete", True):
            return None
        reps.append(rep)
    return reps


def min_acpc_max_reach(inst: JointInstance, delta: float = 0.05, cfg: AcpcConfig | None = None) -> AcpcSelection:
    """Bisection on ``lam`` with one greedy cover per AMEC.

    A level is accepted when the covers fit in ``k`` states together.  The
    returned set meets every AMEC, so it also keeps the reach probability
    of the AMECs maximal.
    """
    if inst.k < inst.n_amecs:
        raise UnreachableError(f"budget k={inst.k} cannot meet all {inst.n_amecs} AMECs")
    cfg = cfg or AcpcConfig()
    zetas = [10.0 * sub.n if cfg.zeta is None else cfg.zeta for sub in inst.sub_mdps]
    samples = [BodySample(sub, z, cfg.n_samples, cfg.seed) for sub, z in zip(inst.sub_mdps, zetas)]
    hi = max(lambda_upper(sub, tol=cfg.oracle_tol) for sub in inst.sub_mdps)
    lam_max, lo = hi, 0.0

    def attempt(lam):
        reps = _covers(inst, lam, samples, zetas, cfg)
        if reps is None:
            return None, inst.k + 1, False
        size = sum(len(r.chosen) for r in reps)
        return reps, size, size <= inst.k

    best, size, ok = attempt(hi)
    history = [(hi, size, ok)]
    if not ok:
        raise UnreachableError(f"no {inst.k}-set covers every AMEC at lambda_max={hi}")
    while hi - lo > delta:
        lam = 0.5 * (lo + hi)
        reps, size, ok = attempt(lam)
        history.append((lam, size, ok))
        if ok:
            hi, best = lam, reps
        else:
            lo = lam
    chosen = tuple(sorted(v for q, r in enumerate(best) for v in inst.globalize(r.chosen, q)))
    cert = max(acpc_optimal(sub, r.chosen, tol=cfg.oracle_tol).lam for sub, r in zip(inst.sub_mdps, best))
    rep = best[0] if inst.n_amecs == 1 else None
    return AcpcSelection(chosen, hi, cert, rep, lam_max, lo, history)


# ------------------------------------------------------------ two-stage rule

@dataclass
class TwoStageResult:
    per_amec_sets: list
    costs: list
    chosen_amecs: tuple[int, ...]
    final_set: tuple[int, ...]
    stage_bounds: tuple[float, float] = (math.inf, math.inf)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if [len(s) for s in self.per_amec_sets] != list(self.costs):
            raise ValueError("costs must equal per-AMEC set sizes")
        union = sorted({v for q in self.chosen_amecs for v in self.per_amec_sets[q]})
        if tuple(union) != tuple(self.final_set):
            raise ValueError("final set must be the union of the chosen per-AMEC sets")

    @property
    def ratio_bound(self) -> float:
        return self.stage_bounds[0] * self.stage_bounds[1]


def _log_ratio(r_pen: float) -> float:
    return math.inf if r_pen <= 0 else 1.0 + math.log(1.0 / r_pen)


def two_stage_select(inst: JointInstance, lam: float, cfg: AcpcConfig | None = None) -> TwoStageResult:
    """Cheapest cover per AMEC, then AMECs picked by cost per unit of ``r_lam`` removed.

    Stage 2 works on the whole MDP's polytope with ``S`` the union of the
    picked AMECs' sets and stops once its interior is empty.  Ratio ties go
    to the smaller LP margin, then the lower AMEC index.
    """
    cfg = cfg or AcpcConfig()
    m = inst.mdp
    sets, costs, stage1 = [], [], []
    bad = []
    for q, sub in enumerate(inst.sub_mdps):
        zeta = 10.0 * sub.n if cfg.zeta is None else cfg.zeta
        rep = greedy_cover_at(sub, lam, zeta, BodySample(sub, zeta, cfg.n_samples, cfg.seed),
                              empty_tol=cfg.empty_tol)
        if not rep.meta.get("complete", True):
            bad.append(q)
            continue
        sets.append(inst.globalize(rep.chosen, q))
        costs.append(len(rep.chosen))
        stage1.append(rep.bound)
    if bad:
        raise InfeasibleError(f"AMECs {bad} cannot be covered at lambda={lam}")

    zeta = 10.0 * m.n if cfg.zeta is None else cfg.zeta
    body = BodySample(m, zeta, cfg.n_samples, cfg.seed)
    union = lambda T: tuple(sorted({v for q in T for v in sets[q]}))
    r = lambda T: body.fraction(union(T), lam)
    margin = lambda T: max_margin(build_acpc_polytope(m, union(T), lam, zeta))

    T: list[int] = []
    trace = []
    r_vals = [1.0]
    while margin(T) > cfg.empty_tol:
        left = [q for q in range(inst.n_amecs) if q not in T]
        if not left:
            raise InfeasibleError(f"all AMEC sets together leave P(lambda={lam}) nonempty")
        base = r(T)
        scored = []
        for q in left:
            gain = base - r(T + [q])
            ratio = costs[q] / gain if gain > 0 else math.inf
            scored.append((ratio, margin(T + [q]), q))
        pick = min(scored)
        T.append(pick[2])
        trace.append(pick)
        r_vals.append(r(T))
    stage2 = _log_ratio(r_vals[-2]) if len(r_vals) >= 2 else 1.0
    bound1 = max(stage1) if stage1 else 1.0
    return TwoStageResult(sets, costs, tuple(sorted(T)), union(T), (bound1, stage2), trace)


def min_cover_brute(m: Mdp, lam: float, ground, zeta: float | None = None,
                    empty_tol: float = 1e-9) -> tuple[int, ...] | None:
    """Smallest subset of ``ground`` whose polytope has empty interior (exhaustive)."""
    ground = sorted(ground)
    if len(ground) > ENUM_GUARD + 4:
        raise SizeGuardError("exhaustive cover search limited to 12 candidates")
    zeta = 10.0 * m.n if zeta is None else zeta
    for r in range(1, len(ground) + 1):
        for S in itertools.combinations(ground, r):
            if max_margin(build_acpc_polytope(m, S, lam, zeta)) <= empty_tol:
                return S
    return None


# ---------------------------------------------------------------- z-system

def z_system_feasible(m: Mdp, S, lam: float, beta: float = 1.0) -> bool:
    """Feasibility of ``z >= 0``, ``1'z = beta``, ``z_i (1 - lam 1{i in S}) >= P(i,a,.) z`` for every row.

    Kept for reference and tests; stage 2 decides coverage with the ACPC
    polytope instead.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    S = set(node_set(S, m.n))
    rows = []
    for i, a in m.rows():
        r = m.P[i, a].copy()
        r[i] -= 1.0 - (lam if i in S else 0.0)
        rows.append(r)
    try:
        solve_lp(np.zeros(m.n), np.array(rows), np.zeros(len(rows)),
                 np.ones((1, m.n)), np.array([beta]), bounds=[(0.0, None)] * m.n)
    except InfeasibleError:
        return False
    return True
