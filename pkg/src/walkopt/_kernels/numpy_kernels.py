"""Pure-numpy reference versions of the hot loops.

Every function here has a twin with the same signature in
``numba_kernels``.  Both consume the same pre-drawn random numbers, so the
integer-valued kernels (walks, first visits, cover walks) agree bit-for-bit
across backends; the floating-point kernels agree to rounding.
"""

import numpy as np


def walk_paths(cum, starts, U):
    n = cum.shape[0]
    n_paths, horizon = U.shape
    out = np.empty((n_paths, horizon + 1), dtype=np.int64)
    state = np.asarray(starts, dtype=np.int64).copy()
    out[:, 0] = state
    for t in range(horizon):
        state = (U[:, t, None] >= cum[state]).sum(axis=1)
        np.minimum(state, n - 1, out=state)
        out[:, t + 1] = state
    return out


def first_visits(states, n):
    n_paths, length = states.shape
    fv = np.full((n_paths, n), -1, dtype=np.int64)
    rows = np.arange(n_paths)
    # walking backwards leaves the earliest index in place
    for t in range(length - 1, -1, -1):
        fv[rows, states[:, t]] = t
    return fv


def cover_walk(cum, state, unvisited, remaining, U):
    n = cum.shape[0]
    n_paths, horizon = U.shape
    consumed = np.where(remaining == 0, 0, horizon).astype(np.int64)
    active = remaining > 0
    for t in range(horizon):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nxt = (U[idx, t, None] >= cum[state[idx]]).sum(axis=1)
        np.minimum(nxt, n - 1, out=nxt)
        state[idx] = nxt
        hit = unvisited[idx, nxt]
        rows = idx[hit]
        unvisited[rows, nxt[hit]] = False
        remaining[rows] -= 1
        done = rows[remaining[rows] == 0]
        consumed[done] = t + 1
        active[done] = False
    return consumed


def hit_and_run(A, b, lo, hi, x0, D, U, thin):
    n_steps, dim = D.shape
    x = x0.astype(np.float64).copy()
    out = np.empty((n_steps // thin, dim))
    k = 0
    for step in range(n_steps):
        d = D[step]
        slack = np.maximum(b - A @ x, 0.0)
        ad = A @ d
        t_lo, t_hi = -np.inf, np.inf
        pos = ad > 1e-300
        neg = ad < -1e-300
        if pos.any():
            t_hi = min(t_hi, np.min(slack[pos] / ad[pos]))
        if neg.any():
            t_lo = max(t_lo, np.max(slack[neg] / ad[neg]))
        up = np.maximum(hi - x, 0.0)
        down = np.minimum(lo - x, 0.0)
        dp = d > 1e-300
        dn = d < -1e-300
        if dp.any():
            t_hi = min(t_hi, np.min(up[dp] / d[dp]))
            t_lo = max(t_lo, np.max(down[dp] / d[dp]))
        if dn.any():
            t_hi = min(t_hi, np.min(down[dn] / d[dn]))
            t_lo = max(t_lo, np.max(up[dn] / d[dn]))
        if np.isfinite(t_lo) and np.isfinite(t_hi) and t_hi > t_lo:
            x = x + (t_lo + U[step] * (t_hi - t_lo)) * d
        if (step + 1) % thin == 0:
            out[k] = x
            k += 1
    return out


def _q_values(P, valid, cost, h):
    Q = cost + np.einsum("iaj,j->ia", P, h)
    return np.where(valid, Q, np.inf)


def ssp_value_iteration(P, valid, cost, target, h0, tol, max_iter):
    h = h0.astype(np.float64).copy()
    h[target] = 0.0
    for it in range(max_iter):
        new = _q_values(P, valid, cost, h).min(axis=1)
        new[target] = 0.0
        diff = np.max(np.abs(new - h)) if h.size else 0.0
        h = new
        if diff <= tol:
            return h, it + 1
    return h, max_iter


def relative_value_iteration(P, valid, cost, h0, tau, tol, max_iter):
    h = h0.astype(np.float64).copy()
    d_prev = np.full(h.shape, np.inf)
    d = np.zeros_like(h)
    for it in range(max_iter):
        Th = _q_values(P, valid, cost, h).min(axis=1)
        d = Th - h
        h = h + tau * d
        h -= h.min()
        if np.max(np.abs(d - d_prev)) <= tol:
            return h, d, it + 1
        d_prev = d
    return h, d, max_iter


def _select(x, cand, k, largest):
    vals = x[cand]
    order = np.argsort(-vals if largest else vals, kind="mergesort")
    return cand[order[:k]]


def barrier_subgradient(C, d, x0, cand, k, rho, delta, sign, eps, mu0,
                        anneal_every, anneal_factor, max_iter, largest):
    x = x0.astype(np.float64).copy()
    Ct = np.ascontiguousarray(C.T)
    mu = mu0
    v = np.ones_like(x)
    for it in range(max_iter):
        S = _select(x, cand, k, largest)
        v[:] = 1.0
        v[S] = 1.0 - rho
        s = d - C @ x
        w = -mu * (Ct @ (1.0 / s))
        step = delta * (sign * v + w)
        xn = x + step
        for _ in range(60):
            if np.all(d - C @ xn > 0.0):
                break
            step *= 0.5
            xn = x + step
        else:
            xn = x
        moved = np.sqrt(np.sum((xn - x) ** 2))
        x = xn
        if (it + 1) % anneal_every == 0:
            mu *= anneal_factor
        if moved <= eps:
            return x, it + 1, True
    return x, max_iter, False
