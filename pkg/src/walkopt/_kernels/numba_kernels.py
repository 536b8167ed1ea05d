"""numba-compiled twins of ``numpy_kernels``.

Signatures and random-number consumption are identical; see the numpy
module for the contract of each function.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _draw(cum, s, u):
    # first j with cum[s, j] > u
    lo = 0
    hi = cum.shape[1] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[s, mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def walk_paths(cum, starts, U):
    n_paths, horizon = U.shape
    out = np.empty((n_paths, horizon + 1), dtype=np.int64)
    for p in range(n_paths):
        s = starts[p]
        out[p, 0] = s
        for t in range(horizon):
            s = _draw(cum, s, U[p, t])
            out[p, t + 1] = s
    return out


@njit(cache=True)
def first_visits(states, n):
    n_paths, length = states.shape
    fv = np.full((n_paths, n), -1, dtype=np.int64)
    for p in range(n_paths):
        for t in range(length):
            s = states[p, t]
            if fv[p, s] < 0:
                fv[p, s] = t
    return fv


@njit(cache=True)
def cover_walk(cum, state, unvisited, remaining, U):
    n_paths, horizon = U.shape
    consumed = np.zeros(n_paths, dtype=np.int64)
    for p in range(n_paths):
        if remaining[p] == 0:
            continue
        consumed[p] = horizon
        s = state[p]
        for t in range(horizon):
            s = _draw(cum, s, U[p, t])
            if unvisited[p, s]:
                unvisited[p, s] = False
                remaining[p] -= 1
                if remaining[p] == 0:
                    consumed[p] = t + 1
                    break
        state[p] = s
    return consumed


@njit(cache=True)
def hit_and_run(A, b, lo, hi, x0, D, U, thin):
    n_steps, dim = D.shape
    m = A.shape[0]
    x = x0.astype(np.float64).copy()
    out = np.empty((n_steps // thin, dim))
    k = 0
    for step in range(n_steps):
        t_lo = -np.inf
        t_hi = np.inf
        for r in range(m):
            ax = 0.0
            ad = 0.0
            for j in range(dim):
                ax += A[r, j] * x[j]
                ad += A[r, j] * D[step, j]
            slack = max(b[r] - ax, 0.0)
            if ad > 1e-300:
                t_hi = min(t_hi, slack / ad)
            elif ad < -1e-300:
                t_lo = max(t_lo, slack / ad)
        for j in range(dim):
            dj = D[step, j]
            up = max(hi[j] - x[j], 0.0)
            down = min(lo[j] - x[j], 0.0)
            if dj > 1e-300:
                t_hi = min(t_hi, up / dj)
                t_lo = max(t_lo, down / dj)
            elif dj < -1e-300:
                t_hi = min(t_hi, down / dj)
                t_lo = max(t_lo, up / dj)
        if np.isfinite(t_lo) and np.isfinite(t_hi) and t_hi > t_lo:
            t = t_lo + U[step] * (t_hi - t_lo)
            for j in range(dim):
                x[j] += t * D[step, j]
        if (step + 1) % thin == 0:
            out[k] = x
            k += 1
    return out


@njit(cache=True)
def _bellman_min(P, valid, cost, h, out):
    n, na, _ = P.shape
    for i in range(n):
        best = np.inf
        for a in range(na):
            if not valid[i, a]:
                continue
            q = cost[i, a]
            for j in range(n):
                q += P[i, a, j] * h[j]
            if q < best:
                best = q
        out[i] = best


@njit(cache=True)
def ssp_value_iteration(P, valid, cost, target, h0, tol, max_iter):
    n = h0.shape[0]
    h = h0.astype(np.float64).copy()
    new = np.empty(n)
    for i in range(n):
        if target[i]:
            h[i] = 0.0
    for it in range(max_iter):
        _bellman_min(P, valid, cost, h, new)
        diff = 0.0
        for i in range(n):
            if target[i]:
                new[i] = 0.0
            diff = max(diff, abs(new[i] - h[i]))
            h[i] = new[i]
        if diff <= tol:
            return h, it + 1
    return h, max_iter


@njit(cache=True)
def relative_value_iteration(P, valid, cost, h0, tau, tol, max_iter):
    n = h0.shape[0]
    h = h0.astype(np.float64).copy()
    Th = np.empty(n)
    d = np.zeros(n)
    d_prev = np.full(n, np.inf)
    for it in range(max_iter):
        _bellman_min(P, valid, cost, h, Th)
        change = 0.0
        for i in range(n):
            d[i] = Th[i] - h[i]
            change = max(change, abs(d[i] - d_prev[i]))
            h[i] += tau * d[i]
        hmin = h.min()
        for i in range(n):
            h[i] -= hmin
        if change <= tol:
            return h, d, it + 1
        d_prev[:] = d
    return h, d, max_iter


@njit(cache=True)
def barrier_subgradient(C, d, x0, cand, k, rho, delta, sign, eps, mu0,
                        anneal_every, anneal_factor, max_iter, largest):
    # same BLAS products as the numpy twin: the selection step amplifies any
    # difference in summation order, so the arithmetic must match exactly
    m, n = C.shape
    Ct = np.ascontiguousarray(C.T)
    x = x0.astype(np.float64).copy()
    v = np.empty(n)
    mu = mu0
    for it in range(max_iter):
        vals = x[cand]
        if largest:
            order = np.argsort(-vals, kind="mergesort")
        else:
            order = np.argsort(vals, kind="mergesort")
        v[:] = 1.0
        for q in range(min(k, cand.shape[0])):
            v[cand[order[q]]] = 1.0 - rho
        s = d - np.dot(C, x)
        w = -mu * np.dot(Ct, 1.0 / s)
        step = delta * (sign * v + w)
        xn = x + step
        ok = False
        for _ in range(60):
            if np.all(d - np.dot(C, xn) > 0.0):
                ok = True
                break
            step *= 0.5
            xn = x + step
        if not ok:
            xn = x.copy()
        moved = np.sqrt(np.sum((xn - x) ** 2))
        x = xn
        if (it + 1) % anneal_every == 0:
            mu *= anneal_factor
        if moved <= eps:
            return x, it + 1, True
    return x, max_iter, False
