"""Time each hot kernel on the numba and numpy backends with identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from walkopt._kernels import numba_kernels, numpy_kernels
from walkopt.acpc import acpc_matrix
from walkopt.graph import Mdp, gen_erdos_renyi, gen_random_mdp
from walkopt.reachability import barrier_system


def reach_mdp(n, seed):
    rng = np.random.default_rng(seed)
    m = gen_random_mdp(n, seed=seed, n_actions=2)
    P = m.P.copy()
    sinks = rng.choice(n, size=3, replace=False)
    P[sinks] = 0.0
    P[sinks, :, sinks] = 1.0
    return Mdp(P, m.valid, unsafe=[int(sinks[0])])


def cases():
    rng = np.random.default_rng(0)
    g = gen_erdos_renyi(50, 0.2, seed=1)
    U_walk = rng.random((200, 2000))
    starts = np.zeros(200, np.int64)
    yield "walk_paths 200x2000", lambda mod: mod.walk_paths(g.cum, starts, U_walk)

    paths = numpy_kernels.walk_paths(g.cum, starts, U_walk)
    yield "first_visits 200x2001", lambda mod: mod.first_visits(paths, 50)

    U_cov = rng.random((200, 3000))

    def cover(mod):
        un = np.ones((200, 50), bool)
        un[:, 0] = False
        rem = un.sum(axis=1).astype(np.int64)
        return mod.cover_walk(g.cum, np.zeros(200, np.int64), un, rem, U_cov)
    yield "cover_walk 200 walks", cover

    m = gen_random_mdp(20, seed=2)
    A, _ = acpc_matrix(m)
    D = rng.standard_normal((20_000, 20))
    D -= D.mean(axis=1, keepdims=True)
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    U = rng.random(20_000)
    lo, hi = np.full(20, -200.0), np.full(20, 200.0)
    yield "hit_and_run 20k steps", lambda mod: mod.hit_and_run(A, np.ones(len(A)), lo, hi, np.zeros(20), D, U, 20)

    P = np.ascontiguousarray(m.P)
    target = np.zeros(20, bool)
    target[[0, 7]] = True
    cost = np.ones(m.valid.shape)
    yield "ssp_value_iteration n=20", lambda mod: mod.ssp_value_iteration(
        P, m.valid, cost, target, np.zeros(20), 1e-12, 10**6)
    rcost = 1.0 - 4.0 * P[:, :, [0, 7]].sum(axis=2)
    yield "relative_value_iteration n=20", lambda mod: mod.relative_value_iteration(
        P, m.valid, rcost, np.zeros(20), 0.5, 1e-12, 10**6)

    r = reach_mdp(12, 3)
    keep, C, d = barrier_system(r, r.unsafe, 1e-5)
    cand = np.arange(keep.size, dtype=np.int64)
    yield "barrier_subgradient n=12 k=2", lambda mod: mod.barrier_subgradient(
        C, d, np.zeros(keep.size), cand, 2, r.n + 1.0, 1e-3, 1.0, 1e-6, 1e-2, 100, 0.5, 100_000, False)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if numba_kernels is None:
        raise SystemExit("numba backend unavailable; nothing to compare")
    print(f"{'kernel':34s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, fn in cases():
        fn(numba_kernels)  # compile outside the timed runs
        t_np = best_of(lambda: fn(numpy_kernels), args.repeat)
        t_nb = best_of(lambda: fn(numba_kernels), args.repeat)
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
