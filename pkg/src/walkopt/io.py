"""Loaders and writers for graph (CSV) and MDP (JSON) files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .graph import Mdp, StochasticGraph

JSON_ROW_TOL = 1e-9


def load_graph(path) -> StochasticGraph:
    """Read a weight matrix or an ``i,j,weight`` edge list and normalize rows.

    A file whose first row is ``i,j,weight`` (any case) is an edge list;
    anything else is a dense matrix, one row per line.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty graph file")
    header = [c.strip().lower() for c in rows[0]]
    if header[:3] == ["i", "j", "weight"]:
        edges = [(int(r[0]), int(r[1]), float(r[2])) for r in rows[1:]]
        if not edges:
            raise ValueError(f"{path}: edge list has no edges")
        n = 1 + max(max(i, j) for i, j, _ in edges)
        W = np.zeros((n, n))
        for i, j, w in edges:
            W[i, j] += w
    else:
        W = np.array([[float(c) for c in r] for r in rows])
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"{path}: weight matrix must be square")
    return StochasticGraph.from_weights(W)


def save_graph(g: StochasticGraph, path) -> None:
    np.savetxt(path, g.P, delimiter=",", fmt="%.17g")


def mdp_from_dict(data: dict) -> Mdp:
    """Build an MDP from ``{n, actions, transitions, unsafe}``.

    ``actions[i]`` is the number of actions at state ``i`` (0 for a passive
    state).  ``transitions`` holds ``[i, a, j, p]`` entries; for passive
    states ``a`` is ``null``.
    """
    try:
        n = int(data["n"])
        actions = [int(k) for k in data["actions"]]
        trans = data["transitions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"MDP document missing or malformed field: {exc}") from None
    if len(actions) != n or min(actions, default=0) < 0:
        raise ValueError("actions must list a nonnegative count for each of the n states")
    na = max(max(actions), 1)
    P = np.zeros((n, na, n))
    valid = np.zeros((n, na), bool)
    passive = np.array([k == 0 for k in actions])
    for i, k in enumerate(actions):
        valid[i, : max(k, 1)] = True
    for entry in trans:
        i, a, j, p = entry
        i, j = int(i), int(j)
        a = 0 if a is None else int(a)
        if not (0 <= i < n and 0 <= j < n and 0 <= a < na) or not valid[i, a]:
            raise ValueError(f"transition {entry} references an unknown state or action")
        if passive[i] and entry[1] is not None:
            raise ValueError(f"state {i} has no actions; its transitions need a null action")
        P[i, a, j] += float(p)
    err = np.abs(P[valid].sum(axis=1) - 1.0)
    if err.size and err.max() > JSON_ROW_TOL:
        bad = [(int(i), int(a)) for (i, a), e in zip(zip(*np.nonzero(valid)), err) if e > JSON_ROW_TOL]
        raise ValueError(f"rows do not sum to 1 within {JSON_ROW_TOL}: {bad[:5]}")
    return Mdp(P, valid, unsafe=data.get("unsafe", []), passive=passive)


def mdp_to_dict(m: Mdp) -> dict:
    actions = [0 if m.passive[i] else len(m.actions(i)) for i in range(m.n)]
    trans = []
    for i, a in m.rows():
        for j in np.flatnonzero(m.P[i, a]):
            trans.append([i, None if m.passive[i] else a, int(j), float(m.P[i, a, j])])
    return {"n": m.n, "actions": actions, "transitions": trans, "unsafe": list(m.unsafe)}


def load_mdp(path) -> Mdp:
    return mdp_from_dict(json.loads(Path(path).read_text()))


def save_mdp(m: Mdp, path) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(m)))
