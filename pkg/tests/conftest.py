import numpy as np
import pytest

from walkopt.graph import Mdp, StochasticGraph, gen_erdos_renyi


def reach_fixture(n, seed, n_actions=2):
    """Random MDP with three absorbing states; the first is unsafe.

    Every other row is supported on two random states with exponential
    weights, so reach probabilities are far from trivial.
    """
    rng = np.random.default_rng(seed)
    absorbing = rng.choice(n, size=3, replace=False)
    P = np.zeros((n, n_actions, n))
    valid = np.ones((n, n_actions), bool)
    for i in range(n):
        for a in range(n_actions):
            if i in absorbing:
                P[i, a, i] = 1.0
                continue
            supp = rng.choice(n, size=2, replace=False)
            w = rng.exponential(size=2)
            P[i, a, supp] = w / w.sum()
    return Mdp(P, valid, unsafe=[int(absorbing[0])])


def star_mdp(n, seed):
    """Hub 0 with two randomized actions; leaves return to the hub or stay."""
    rng = np.random.default_rng(seed)
    P = np.zeros((n, 2, n))
    for a in range(2):
        w = rng.exponential(size=n)
        P[0, a] = w / w.sum()
    for i in range(1, n):
        for a in range(2):
            q = rng.uniform(0.2, 1.0)
            P[i, a, 0] = q
            P[i, a, i] = 1.0 - q
    return Mdp(P, np.ones((n, 2), bool))


def two_cycle_mdp():
    """State 0 chooses between a 2-cycle {1, 2} and a 3-cycle {3, 4, 5}."""
    n = 6
    P = np.zeros((n, 2, n))
    V = np.zeros((n, 2), bool)
    P[0, 0, 1] = P[0, 1, 3] = 1.0
    V[0] = True
    for a, b in [(1, 2), (2, 1), (3, 4), (4, 5), (5, 3)]:
        P[a, 0, b] = 1.0
        V[a, 0] = True
    return Mdp(P, V)


def cycle_mdp(lengths):
    """Hub 0 choosing among deterministic cycles of the given lengths."""
    n = 1 + sum(lengths)
    P = np.zeros((n, len(lengths), n))
    V = np.zeros((n, len(lengths)), bool)
    start = 1
    for c, L in enumerate(lengths):
        P[0, c, start] = 1.0
        V[0, c] = True
        for q in range(L):
            i = start + q
            P[i, 0, start + (q + 1) % L] = 1.0
            V[i, 0] = True
        start += L
    return Mdp(P, V)


def multi_amec_mdp(seed, sizes=(2, 3), n_transient=2, unsafe=True, n_actions=2):
    """Transient states feeding several closed random blocks and one unsafe sink."""
    rng = np.random.default_rng(seed)
    n = n_transient + sum(sizes) + (1 if unsafe else 0)
    P = np.zeros((n, n_actions, n))
    blocks, start = [], n_transient
    for s in sizes:
        blocks.append(list(range(start, start + s)))
        start += s
    sink = n - 1 if unsafe else None
    for i in range(n_transient):
        for a in range(n_actions):
            w = rng.exponential(size=n)
            w[rng.random(n) < 0.4] = 0.0
            w[blocks[a % len(blocks)][0]] += 0.5
            P[i, a] = w / w.sum()
    for b in blocks:
        for i in b:
            for a in range(n_actions):
                w = rng.exponential(size=len(b))
                P[i, a, b] = w / w.sum()
    if unsafe:
        P[sink, :, sink] = 1.0
    return Mdp(P, np.ones((n, n_actions), bool), unsafe=[sink] if unsafe else [])


def connected_er(n, p, seed):
    """Erdos-Renyi graph resampled until strongly connected (deterministic per seed)."""
    for k in range(1000):
        g = gen_erdos_renyi(n, p, seed=seed * 1000 + k)
        if g.is_strongly_connected():
            return g
    raise RuntimeError("no strongly connected sample")


def lazy_two_state(p=0.5):
    return StochasticGraph(np.array([[1 - p, p], [p, 1 - p]]))


def directed_cycle(n):
    return StochasticGraph(np.roll(np.eye(n), 1, axis=1))


def complete_graph(n):
    W = np.ones((n, n)) - np.eye(n)
    return StochasticGraph.from_weights(W)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
