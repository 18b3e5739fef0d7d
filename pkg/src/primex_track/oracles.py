"""Independent reference computations used to freeze and check expected values.

Nothing here imports the fusion, belief or protocol code: each oracle
recomputes its quantity by a different route (binomial counting, grid search,
numerical quadrature, joint-trajectory least squares, set flooding).
"""

from __future__ import annotations

from math import comb
from typing import Sequence

import numpy as np


def alternating_fuse_binomial(codes: Sequence[Sequence[int]]) -> list[int]:
    """Alternating r-wise GCD product for binary codes by counting.

    An entry set in ``m`` of the codes appears in ``C(m, r)`` r-subsets, so
    its exponent is ``sum_r (-1)**(r-1) C(m, r)``.
    """
    arr = np.asarray(codes, dtype=int)
    n = arr.shape[0]
    out = []
    for m in arr.sum(axis=0):
        out.append(sum((-1) ** (r - 1) * comb(int(m), r) for r in range(1, n + 1)))
    return out


def ls_objective(phi_i, phi_j, w_i) -> np.ndarray:
    """``||w_i phi_i + (1 - w_i) phi_j - min(phi_i, phi_j)||^2`` for array ``w_i``."""
    a = np.asarray(phi_i, dtype=float)
    b = np.asarray(phi_j, dtype=float)
    target = np.minimum(a, b)
    w = np.atleast_1d(np.asarray(w_i, dtype=float))[:, None]
    resid = w * a + (1.0 - w) * b - target
    return np.sum(resid * resid, axis=1)


def grid_search_weights(phi_i, phi_j, step: float = 1e-4) -> tuple[float, float]:
    """Brute-force minimizer of the shared-information fit over ``w_i`` in ``[0, 1]``.

    Returns ``(w_i, objective)``; ties resolve to the smallest ``w_i``.
    """
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    vals = ls_objective(phi_i, phi_j, grid)
    best = int(np.argmin(vals))
    return float(grid[best]), float(vals[best])


def pool_quadrature_1d(
    means: Sequence[float], variances: Sequence[float], weights: Sequence[float], half_width: float = 40.0, n: int = 400001
) -> tuple[float, float]:
    """Mean and variance of ``prod N(x; m, v) ** w`` renormalized, by trapezoid quadrature."""
    center = float(np.average(means))
    spread = max(float(np.sqrt(max(variances))), 1.0)
    x = np.linspace(center - half_width * spread, center + half_width * spread, n)
    log_p = np.zeros_like(x)
    for m, v, w in zip(means, variances, weights):
        log_p += w * (-0.5 * (x - m) ** 2 / v - 0.5 * np.log(2 * np.pi * v))
    p = np.exp(log_p - log_p.max())
    z = np.trapezoid(p, x)
    mean = np.trapezoid(x * p, x) / z
    var = np.trapezoid((x - mean) ** 2 * p, x) / z
    return float(mean), float(var)


def ci_trace_grid(cov_a: np.ndarray, cov_b: np.ndarray, step: float = 1e-4) -> tuple[float, float]:
    """Grid minimizer of ``trace((w A^-1 + (1 - w) B^-1)^-1)``; returns ``(w, trace)``."""
    ia = np.linalg.inv(np.atleast_2d(cov_a))
    ib = np.linalg.inv(np.atleast_2d(cov_b))
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    mats = grid[:, None, None] * ia + (1.0 - grid)[:, None, None] * ib
    vals = np.trace(np.linalg.inv(mats), axis1=1, axis2=2)
    best = int(np.argmin(vals))
    return float(grid[best]), float(vals[best])


def batch_filter(
    prior_mean, prior_cov, F, Q, H, R, measurements: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Filtering posteriors from the joint trajectory density.

    For each ``k`` the joint Gaussian of ``x_1..x_k`` (prior on ``x_1``,
    transitions, every measurement up to ``k``) is assembled as one
    information matrix and solved; the ``x_k`` block is returned.
    ``measurements`` has shape ``(K, S, n_z)``.
    """
    prior_mean = np.asarray(prior_mean, dtype=float)
    n = prior_mean.size
    K = measurements.shape[0]
    Qi = np.linalg.inv(Q)
    Ri = np.linalg.inv(R)
    P0i = np.linalg.inv(prior_cov)
    lam = np.zeros((n * K, n * K))
    eta = np.zeros(n * K)
    lam[:n, :n] += P0i
    eta[:n] += P0i @ prior_mean
    out = []
    for k in range(K):
        s = slice(n * k, n * (k + 1))
        if k > 0:
            p = slice(n * (k - 1), n * k)
            lam[p, p] += F.T @ Qi @ F
            lam[p, s] -= F.T @ Qi
            lam[s, p] -= Qi @ F
            lam[s, s] += Qi
        for z in measurements[k]:
            lam[s, s] += H.T @ Ri @ H
            eta[s] += H.T @ Ri @ z
        m = n * (k + 1)
        sub = lam[:m, :m]
        mean = np.linalg.solve(sub, eta[:m])[s]
        unit = np.zeros((m, n))
        unit[s, :] = np.eye(n)
        cov = np.linalg.solve(sub, unit)[s, :]
        out.append((mean, 0.5 * (cov + cov.T)))
    return out


def flood_union(codes: Sequence[set[int]], edges: Sequence[tuple[int, int]]) -> list[set[int]]:
    """Pedigree sets after flooding to a fixed point: each node ends with the
    union over every node that can reach it."""
    cur = [set(c) for c in codes]
    changed = True
    while changed:
        changed = False
        for j, i in edges:
            if not cur[j] <= cur[i]:
                cur[i] |= cur[j]
                changed = True
    return cur


def topology_diameter(n: int, edges: Sequence[tuple[int, int]]) -> int:
    """Largest directed shortest-path distance (``inf`` pairs ignored)."""
    adj = [[] for _ in range(n)]
    for j, i in edges:
        adj[j].append(i)
    best = 0
    for src in range(n):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        best = max(best, max(dist.values()))
    return best
