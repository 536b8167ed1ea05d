"""``walkopt`` command line: generators, walk times, selection algorithms, experiments.

Every subcommand reads an optional JSON config (``--config``); the common
flags override matching config keys.  Results go to stdout as JSON, or to
``--out``.  Exit codes: 0 success, 2 configuration error, 3 algorithm failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .acpc import AcpcConfig, min_acpc_select
from .errors import WalkoptError
from .experiments import ConfigError, ExperimentConfig, run_experiment
from .graph import gen_erdos_renyi, gen_lattice_mdp, gen_random_mdp
from .io import load_graph, load_mdp, save_graph, save_mdp
from .joint import JointInstance, min_acpc_max_reach
from .reachability import PenaltyConfig, select_states_reachability
from .walk_times import (EXACT_COVER_MAX, commute_time_exact, cover_time_exact_small, cover_time_mc,
                         hitting_times)

log = logging.getLogger("walkopt")

EXIT_OK, EXIT_CONFIG, EXIT_ALGO = 0, 2, 3


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _load_config(path):
    if path is None:
        return {}, "."
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data, os.path.dirname(os.path.abspath(path))


def _need(cfg, key):
    if key not in cfg:
        raise ConfigError(f"config needs '{key}'")
    return cfg[key]


def _path(cfg, key, base):
    p = _need(cfg, key)
    return p if os.path.isabs(p) else os.path.join(base, p)


def _graph(cfg, base):
    try:
        return load_graph(_path(cfg, "graph", base))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad graph file: {exc}") from exc


def _mdp(cfg, base):
    try:
        return load_mdp(_path(cfg, "mdp", base))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad MDP file: {exc}") from exc


def _budget(args, cfg):
    k = args.budget if args.budget is not None else cfg.get("budget")
    if k is None:
        raise ConfigError("a budget is required (--budget or config 'budget')")
    if int(k) < 1:
        raise ConfigError("budget must be >= 1")
    return int(k)


def _emit(result, out):
    text = json.dumps(_jsonable(result), indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------- subcommands

def cmd_gen(args, cfg, base):
    try:
        return _gen(args, cfg)
    except ValueError as exc:
        raise ConfigError(f"bad generator parameters: {exc}") from exc


def _gen(args, cfg):
    kind = cfg.get("kind", "erdos-renyi")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not args.out:
        raise ConfigError("gen needs --out")
    if kind == "erdos-renyi":
        g = gen_erdos_renyi(int(cfg.get("n", 10)), float(cfg.get("p", 0.3)), seed=seed)
        save_graph(g, args.out)
        return None
    if kind == "lattice":
        m = gen_lattice_mdp(int(cfg.get("rows", 5)), int(cfg.get("cols", 5)), float(cfg.get("p_c", 0.7)))
    elif kind == "random-mdp":
        m = gen_random_mdp(int(cfg.get("n", 10)), seed=seed, n_actions=int(cfg.get("actions", 4)))
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    save_mdp(m, args.out)
    return None


def cmd_hit(args, cfg, base):
    g = _graph(cfg, base)
    S = _need(cfg, "targets")
    out = {"hitting_times": hitting_times(g, S)}
    if "commute_from" in cfg:
        out["commute_time"] = commute_time_exact(g, int(cfg["commute_from"]), S)
    return out


def cmd_cover(args, cfg, base):
    g = _graph(cfg, base)
    S = _need(cfg, "targets")
    start = int(cfg.get("start", 0))
    samples = args.samples if args.samples is not None else cfg.get("samples")
    if samples is None and len(S) <= EXACT_COVER_MAX:
        return {"cover_time": cover_time_exact_small(g, start, S), "exact": True}
    est = cover_time_mc(g, start, S, int(samples or 10_000), seed=args.seed)
    return {"cover_time": est.as_row(), "exact": False}


def cmd_reach(args, cfg, base):
    m = _mdp(cfg, base)
    sel = select_states_reachability(m, m.unsafe, _budget(args, cfg), PenaltyConfig.for_mdp(m))
    return {"chosen": sel.chosen, "reach_sum": sel.achieved, "upper_bound": sel.upper_bound,
            "gap": sel.gap, "iterations": sel.iterations, "converged": sel.converged,
            "reach_probability": sel.value.x}


def _acpc_cfg(args, cfg):
    return AcpcConfig(n_samples=int(args.samples or cfg.get("samples", 2000)),
                      seed=args.seed if args.seed is not None else cfg.get("seed", 0))


def _delta(args, cfg):
    d = args.delta if args.delta is not None else cfg.get("delta", 0.05)
    if d <= 0:
        raise ConfigError("delta must be positive")
    return float(d)


def cmd_acpc(args, cfg, base):
    m = _mdp(cfg, base)
    sel = min_acpc_select(m, _budget(args, cfg), _delta(args, cfg), _acpc_cfg(args, cfg))
    return {"chosen": sel.chosen, "lambda_hat": sel.lambda_hat, "certificate": sel.certificate,
            "lambda_max": sel.lambda_max, "history": sel.history}


def cmd_joint(args, cfg, base):
    m = _mdp(cfg, base)
    inst = JointInstance.from_mdp(m, _budget(args, cfg))
    sel = min_acpc_max_reach(inst, _delta(args, cfg), _acpc_cfg(args, cfg))
    return {"chosen": sel.chosen, "lambda_hat": sel.lambda_hat, "certificate": sel.certificate,
            "amecs": [ec.states for ec in inst.amecs], "history": sel.history}


def cmd_experiment(args, cfg, base):
    if "out" in cfg and cfg["out"] and not os.path.isabs(cfg["out"]):
        cfg = {**cfg, "out": os.path.join(base, cfg["out"])}
    ec = ExperimentConfig.from_dict(cfg)
    ec = ec.replace(seeds=(args.seed,) if args.seed is not None else None, samples=args.samples,
                    delta=args.delta, out=args.out)
    if args.budget is not None:
        ec = ec.replace(budgets=(args.budget,))
    res = run_experiment(ec)
    if not ec.out:
        sys.stdout.write(res.to_csv())
    log.info("checks: %s", res.checks)
    return None


COMMANDS = {"gen": cmd_gen, "hit": cmd_hit, "cover": cmd_cover, "reach": cmd_reach,
            "acpc": cmd_acpc, "joint": cmd_joint, "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="walkopt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--budget", type=int)
        sp.add_argument("--delta", type=float)
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, base = _load_config(args.config)
        result = COMMANDS[args.command](args, cfg, base)
    except (ConfigError, KeyError, TypeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (WalkoptError, ValueError, np.linalg.LinAlgError) as exc:
        log.error("algorithm failure: %s", exc)
        return EXIT_ALGO
    if result is not None:
        _emit(result, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
