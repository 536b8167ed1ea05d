"""Baselines and experiment runners producing plot-ready CSV rows."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .acpc import AcpcConfig, BodySample, build_acpc_polytope, greedy_cover_at, max_margin, min_acpc_select
from .errors import WalkoptError
from .graph import Mdp, StochasticGraph, gen_erdos_renyi, gen_lattice_mdp, gen_random_mdp
from .mdp import acpc_optimal
from .submodular import greedy_chain_min, minimize_submodular
from .walk_times import PathSet, hit_floor, minimize_matthews

SCHEMA_VERSION = 1
EXPERIMENTS = ("acpc-budget", "acpc-lattice", "cover-min")
COLUMNS = ("experiment", "seed", "size_param", "level", "method", "objective", "set_size",
           "evaluations", "runtime_s", "chosen", "error")
CENTRALITY = "graphs: out-degree then in-degree; lattices: distance to grid center; ties to lowest index"


class ConfigError(ValueError):
    """An experiment configuration is malformed or out of range."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 20
    sizes: tuple = (10, 20, 30)
    p: float = 0.3
    rows: int = 5
    cols: int = 5
    p_c: float = 0.7
    budgets: tuple = (2, 3, 4)
    levels: tuple = (1.5, 2.5, 3.5, 4.5, 5.5)
    seeds: tuple = tuple(range(10))
    samples: int = 1000
    delta: float = 0.05
    psi_scale: float = 1.0
    horizon_factor: int = 20
    timing: bool = True
    out: str | None = None

    def __post_init__(self):
        for name in ("sizes", "budgets", "levels", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        bad = []
        if self.experiment not in EXPERIMENTS:
            bad.append(f"experiment must be one of {EXPERIMENTS}")
        if not self.seeds:
            bad.append("seeds must be nonempty")
        if not 2 <= self.n <= 200:
            bad.append("n must lie in [2, 200]")
        if not self.sizes or any(not 2 <= s <= 200 for s in self.sizes):
            bad.append("sizes must lie in [2, 200]")
        if not 0 < self.p <= 1 or not 0 < self.p_c <= 1:
            bad.append("p and p_c must lie in (0, 1]")
        if self.rows < 2 or self.cols < 2:
            bad.append("lattice needs rows, cols >= 2")
        if not self.budgets or any(k < 1 for k in self.budgets):
            bad.append("budgets must be >= 1")
        if not self.levels or any(lv <= 0 for lv in self.levels):
            bad.append("levels must be positive")
        if self.samples < 1 or self.delta <= 0 or self.psi_scale < 0 or self.horizon_factor < 1:
            bad.append("samples, delta, horizon_factor must be positive and psi_scale >= 0")
        if bad:
            raise ConfigError("; ".join(bad))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' key")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})


# ---------------------------------------------------------------- baselines

def baseline_random(ground, k: int, seed=None) -> tuple[int, ...]:
    ground = sorted({int(v) for v in ground})
    if not 0 <= k <= len(ground):
        raise ValueError(f"k={k} must lie in [0, {len(ground)}]")
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(v) for v in rng.choice(ground, size=k, replace=False)))


def baseline_centrality(obj, k: int) -> tuple[int, ...]:
    """``k`` most central nodes (see :data:`CENTRALITY`)."""
    if isinstance(obj, Mdp) and obj.grid is not None:
        rows, cols = obj.grid
        cr, cc = (rows - 1) / 2.0, (cols - 1) / 2.0
        key = lambda i: ((i // cols - cr) ** 2 + (i % cols - cc) ** 2, i)
        n = obj.n
    else:
        if isinstance(obj, Mdp):
            adj = (obj.P * obj.valid[:, :, None]).sum(axis=1) > 0
        elif isinstance(obj, StochasticGraph):
            adj = obj.adjacency
        else:
            adj = np.asarray(obj) > 0
        adj = adj & ~np.eye(adj.shape[0], dtype=bool)
        out_deg, in_deg = adj.sum(axis=1), adj.sum(axis=0)
        key = lambda i: (-out_deg[i], -in_deg[i], i)
        n = adj.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} must lie in [0, {n}]")
    return tuple(sorted(sorted(range(n), key=key)[:k]))


# ------------------------------------------------------------------ runners

def _row(cfg, seed, size_param, level, method, objective=math.nan, chosen=(), evaluations=0,
         runtime=math.nan, error="") -> dict:
    return {"experiment": cfg.experiment, "seed": seed, "size_param": size_param, "level": level,
            "method": method, "objective": float(objective), "set_size": len(chosen) if not error else "",
            "evaluations": evaluations, "runtime_s": round(runtime, 4) if cfg.timing else "",
            "chosen": " ".join(map(str, chosen)), "error": error}


def _timed(cfg, seed, size_param, level, method, fn: Callable) -> dict:
    t0 = time.perf_counter()
    try:
        objective, chosen, evals = fn()
    except (WalkoptError, ValueError, np.linalg.LinAlgError) as exc:
        return _row(cfg, seed, size_param, level, method, error=f"{type(exc).__name__}: {exc}")
    return _row(cfg, seed, size_param, level, method, objective, chosen, evals, time.perf_counter() - t0)


def _random_cover(m: Mdp, lam: float, zeta: float, seed) -> tuple[int, ...]:
    """Shortest prefix of a random permutation whose polytope has empty interior."""
    order = np.random.default_rng(seed).permutation(m.n)
    empty = lambda q: max_margin(build_acpc_polytope(m, order[:q], lam, zeta)) <= 1e-9
    if not empty(m.n):
        raise WalkoptError(f"no cover exists at lambda={lam}")
    lo, hi = 0, m.n  # coverage is monotone, so bisect on the prefix length
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if empty(mid):
            hi = mid
        else:
            lo = mid
    return tuple(sorted(int(v) for v in order[:hi]))


def _acpc_budget(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for seed in cfg.seeds:
        m = gen_random_mdp(cfg.n, seed=seed)
        zeta = 10.0 * m.n
        sample = BodySample(m, zeta, cfg.samples, seed)
        for lam in cfg.levels:
            def greedy():
                rep = greedy_cover_at(m, lam, zeta, sample)
                if not rep.meta.get("complete", True):
                    raise WalkoptError(f"no cover exists at lambda={lam}")
                return len(rep.chosen), rep.chosen, rep.evaluations

            def rand():
                S = _random_cover(m, lam, zeta, seed)
                return len(S), S, 0

            rows.append(_timed(cfg, seed, cfg.n, lam, "greedy", greedy))
            rows.append(_timed(cfg, seed, cfg.n, lam, "random", rand))
    return rows


def _acpc_lattice(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    m = gen_lattice_mdp(cfg.rows, cfg.cols, cfg.p_c)
    size = m.n
    for seed in cfg.seeds:
        for k in cfg.budgets:
            def sub():
                sel = min_acpc_select(m, k, cfg.delta, AcpcConfig(n_samples=cfg.samples, seed=seed))
                return sel.certificate, sel.chosen, sel.greedy_report.evaluations if sel.greedy_report else 0

            def fixed(S):
                return lambda: (acpc_optimal(m, S).lam, S, 1)

            rows.append(_timed(cfg, seed, size, k, "submodular", sub))
            rows.append(_timed(cfg, seed, size, k, "centrality", fixed(baseline_centrality(m, k))))
            rows.append(_timed(cfg, seed, size, k, "random", fixed(baseline_random(range(m.n), k, seed))))
    return rows


def cover_objective(paths: PathSet, psi: float):
    """``S -> mean capped cover time of S - psi |S|`` on a fixed path set."""
    fv = paths.fv.astype(float)

    def f(S):
        S = list(S)
        return (fv[:, S].max(axis=1).mean() if S else 0.0) - psi * len(S)
    return f


def _cover_min(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for N in cfg.sizes:
        for seed in cfg.seeds:
            g = gen_erdos_renyi(N, cfg.p, seed=seed)
            paths = PathSet.simulate(g, 0, cfg.samples, cfg.horizon_factor * N, seed=seed)
            ground = list(range(1, N))
            # psi equal to the average per-node cover cost makes f(empty) = f(ground)
            psi = cfg.psi_scale * float(paths.fv[:, ground].max(axis=1).mean()) / len(ground)
            f = cover_objective(paths, psi)
            level = round(psi, 6)
            opt = {}

            def optimal():
                opt["r"] = minimize_submodular(f, ground)
                return opt["r"].value, opt["r"].minimizer, 0

            def greedy():
                rep = greedy_chain_min(f, ground)
                return rep.value, rep.chosen, rep.evaluations

            def rand():
                if "r" not in opt:
                    raise WalkoptError("random baseline needs the optimal set size")
                S = baseline_random(ground, len(opt["r"].minimizer), seed)
                return f(S), S, 1

            def matthews():
                floors = hit_floor(g)
                if not np.isfinite(floors[ground]).all():
                    raise WalkoptError("some node has no finite hitting-time floor")
                sweep = minimize_matthews(g, psi, floors)
                S = tuple(v for v in sweep.chosen if v != 0)
                return f(S), S, 0

            for name, fn in (("optimal", optimal), ("greedy", greedy), ("random", rand),
                             ("matthews", matthews)):
                rows.append(_timed(cfg, seed, N, level, name, fn))
    return rows


RUNNERS = {"acpc-budget": _acpc_budget, "acpc-lattice": _acpc_lattice, "cover-min": _cover_min}


def _sort_key(r):
    return (str(r["size_param"]), r["seed"] if isinstance(r["seed"], int) else 10**9,
            float(r["level"]) if r["seed"] != "mean" else 0.0, r["method"])


def summarize(rows: list[dict]) -> list[dict]:
    """Mean objective and set size per ``(size_param, level, method)`` over error-free rows."""
    groups: dict = {}
    for r in rows:
        if r["error"]:
            continue
        key = (r["size_param"], r["level"] if r["experiment"] != "cover-min" else "", r["method"])
        groups.setdefault(key, []).append(r)
    out = []
    for (size, level, method), rs in sorted(groups.items(), key=lambda kv: tuple(map(str, kv[0]))):
        out.append({"experiment": rs[0]["experiment"], "seed": "mean", "size_param": size, "level": level,
                    "method": method, "objective": float(np.mean([r["objective"] for r in rs])),
                    "set_size": float(np.mean([r["set_size"] for r in rs])),
                    "evaluations": float(np.mean([r["evaluations"] for r in rs])),
                    "runtime_s": "", "chosen": "", "error": ""})
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: list
    checks: dict = field(default_factory=dict)

    def header(self) -> str:
        return (f"# walkopt-experiment schema={SCHEMA_VERSION} id={self.config.experiment} "
                f"centrality=\"{CENTRALITY}\"")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header() + "\n")
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows + self.summary:
            w.writerow({k: (repr(v) if isinstance(v, float) and not math.isnan(v) else
                            ("" if isinstance(v, float) else v)) for k, v in r.items()})
        return buf.getvalue()

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    rows = sorted(RUNNERS[cfg.experiment](cfg), key=_sort_key)
    res = ExperimentResult(cfg, rows, summarize(rows))
    res.checks = qualitative_checks(res)
    if cfg.out:
        res.write(cfg.out)
    return res


# --------------------------------------------------------- qualitative checks

def diminishing_returns(curve) -> dict:
    """First-difference test: nonincreasing values with nondecreasing (shrinking) drops."""
    c = np.asarray(curve, float)
    d = np.diff(c)
    return {"nonincreasing": bool((d <= 1e-12).all()),
            "diminishing": bool((np.diff(d) >= -1e-12).all()),
            "differences": d.tolist()}


def _means(res: ExperimentResult, size=None) -> dict:
    return {(r["level"], r["method"]): r["objective"] for r in res.summary
            if size is None or r["size_param"] == size}


def qualitative_checks(res: ExperimentResult) -> dict:
    cfg = res.config
    out: dict = {"errors": sum(1 for r in res.rows if r["error"])}
    if cfg.experiment == "acpc-budget":
        means = _means(res)
        levels = sorted(cfg.levels)
        curve = [means.get((lv, "greedy"), math.nan) for lv in levels]
        out.update(diminishing_returns(curve))
        out["curve"] = curve
        out["greedy_le_random"] = all(means.get((lv, "greedy"), math.inf) <= means.get((lv, "random"), -math.inf)
                                      for lv in levels)
    elif cfg.experiment == "acpc-lattice":
        means = _means(res)
        order = {}
        for k in cfg.budgets:
            s, c, r = (means.get((k, m), math.nan) for m in ("submodular", "centrality", "random"))
            order[k] = bool(s <= c <= r)
        out["ordering"] = order
        out["ordering_all"] = all(order.values())
    else:
        per = {}
        for N in cfg.sizes:
            by_seed: dict = {}
            for r in res.rows:
                if r["size_param"] == N and not r["error"]:
                    by_seed.setdefault(r["seed"], {})[r["method"]] = r["objective"]
            close = dominate = 0
            for vals in by_seed.values():
                o, g, rnd = vals.get("optimal"), vals.get("greedy"), vals.get("random")
                if o is None or g is None or rnd is None:
                    continue
                close += g <= o + 0.05 * abs(o)
                dominate += (o < rnd) and (g < rnd)
            total = max(len(by_seed), 1)
            per[N] = {"greedy_within_5pct": close / total, "both_beat_random": dominate / total}
        out["per_size"] = per
        out["pass"] = all(v["greedy_within_5pct"] == 1.0 and v["both_beat_random"] >= 0.8 for v in per.values())
    return out
