"""Independent reference implementations used only by the tests.

Everything here is written as plain loops or exhaustive enumeration so it
shares no code path with the package implementations it checks.
"""

import itertools
import math

import numpy as np


def loop_pairwise_distance(x):
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(x.shape[1]):
                s += (x[i, k] - x[j, k]) ** 2
            out[i, j] = math.sqrt(s)
    return out


def loop_cosine_similarity(x):
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            num = sum(x[i, k] * x[j, k] for k in range(x.shape[1]))
            ni = math.sqrt(sum(v * v for v in x[i]))
            nj = math.sqrt(sum(v * v for v in x[j]))
            out[i, j] = num / (ni * nj)
    return out


def loop_cross_covariance(a, b):
    n, p = a.shape
    q = b.shape[1]
    am = [sum(a[i, k] for i in range(n)) / n for k in range(p)]
    bm = [sum(b[i, k] for i in range(n)) / n for k in range(q)]
    out = np.zeros((p, q))
    for k in range(p):
        for l in range(q):
            s = 0.0
            for i in range(n):
                s += (a[i, k] - am[k]) * (b[i, l] - bm[l])
            out[k, l] = s / (n - 1)
    return out


def loop_frobenius(m):
    return math.sqrt(sum(v * v for v in np.asarray(m).ravel()))


def floyd_warshall(lengths):
    """All-pairs shortest paths; lengths has inf where there is no edge."""
    n = lengths.shape[0]
    d = lengths.copy().astype(float)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def floyd_warshall_path(lengths, source, target):
    """Shortest path reconstruction matching the lowest-index tie-break."""
    n = lengths.shape[0]
    d = lengths.copy().astype(float)
    np.fill_diagonal(d, 0.0)
    nxt = [[j if np.isfinite(lengths[i, j]) else -1 for j in range(n)] for i in range(n)]
    for i in range(n):
        nxt[i][i] = i
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
                    nxt[i][j] = nxt[i][k]
    path = [source]
    while path[-1] != target:
        path.append(nxt[path[-1]][target])
    return d, path


def quartic_alignment_value(d_src, d_tgt, plan):
    n, m = plan.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(m):
                for l in range(m):
                    total += (d_src[i, j] - d_tgt[k, l]) ** 2 * plan[i, k] * plan[j, l]
    return total


def brute_force_alignment(d_src, d_tgt, feature_cost=None, alpha=0.0):
    """Exact minimum over permutation couplings (Birkhoff extreme points)."""
    n = d_src.shape[0]
    assert d_tgt.shape[0] == n
    best = math.inf
    for perm in itertools.permutations(range(n)):
        plan = np.zeros((n, n))
        for i, k in enumerate(perm):
            plan[i, k] = 1.0 / n
        val = quartic_alignment_value(d_src, d_tgt, plan)
        if feature_cost is not None and alpha:
            val += alpha * sum(feature_cost[i, perm[i]] / n for i in range(n))
        best = min(best, val)
    return best


def central_difference(fn, x0, h):
    """Central finite-difference gradient of a scalar function of an array."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    it = np.nditer(x0, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x0.copy()
        xp[idx] += h
        xm = x0.copy()
        xm[idx] -= h
        grad[idx] = (fn(xp) - fn(xm)) / (2 * h)
        it.iternext()
    return grad


def classical_mds(d, dim):
    """Classical multidimensional scaling of a distance matrix."""
    n = d.shape[0]
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (d**2) @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:dim]
    vals = np.clip(vals[order], 0.0, None)
    return vecs[:, order] * np.sqrt(vals)[None, :]


def sinkhorn_reference(cost, a, b, epsilon, iterations=10000):
    """Plain fixed-point scaling iterations, run long, in float128 precision."""
    c = np.asarray(cost, dtype=np.longdouble)
    k = np.exp(-c / np.longdouble(epsilon))
    u = np.ones(c.shape[0], dtype=np.longdouble)
    v = np.ones(c.shape[1], dtype=np.longdouble)
    a = np.asarray(a, dtype=np.longdouble)
    b = np.asarray(b, dtype=np.longdouble)
    for _ in range(iterations):
        u = a / (k @ v)
        v = b / (k.T @ u)
    return np.asarray(u[:, None] * k * v[None, :], dtype=float)
