"""Independent reference solvers used only by the tests.

None of these share code with the package under test.
"""

from __future__ import annotations

import itertools

import numpy as np


def dykstra_order_projection(y, edges, max_sweeps=100_000, tol=1e-14):
    """Project ``y`` onto {x : x[i] <= x[j] for (i, j) in edges} by cyclic
    Dykstra over the half-spaces."""
    x = [float(v) for v in y]
    edges = [(int(i), int(j)) for i, j in edges]
    if not edges:
        return np.array(x)
    pi = [0.0] * len(edges)
    pj = [0.0] * len(edges)
    for _ in range(max_sweeps):
        change = 0.0
        for e, (i, j) in enumerate(edges):
            zi = x[i] + pi[e]
            zj = x[j] + pj[e]
            if zi > zj:
                m = 0.5 * (zi + zj)
                xi = xj = m
            else:
                xi, xj = zi, zj
            pi[e] = zi - xi
            pj[e] = zj - xj
            change = max(change, abs(xi - x[i]), abs(xj - x[j]))
            x[i] = xi
            x[j] = xj
        if change < tol:
            break
    return np.array(x)


def chain_edges(n):
    return [(k, k + 1) for k in range(n - 1)]


def brute_force_chain_isotonic(y):
    """Exact chain isotonic fit by enumerating all contiguous block partitions."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        return y.copy()
    best, best_cost = None, np.inf
    for cuts in itertools.product([False, True], repeat=n - 1):
        bounds = [0] + [k + 1 for k, c in enumerate(cuts) if c] + [n]
        means = [y[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])]
        if any(m1 > m2 for m1, m2 in zip(means[:-1], means[1:])):
            continue
        fit = np.concatenate([np.full(b - a, m) for a, b, m in zip(bounds[:-1], bounds[1:], means)])
        cost = float(np.sum((fit - y) ** 2))
        if cost < best_cost:
            best, best_cost = fit, cost
    return best


def pinned_chain_projection(y, p, c, **kw):
    """Non-decreasing projection of y with entry p (0-based) fixed at c.

    The pinned entry is replaced by a constant: chain constraints are
    projected on the free entries with the pivot frozen by Dykstra over the
    half-spaces touching it.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    free = [k for k in range(n) if k != p]
    idx = {k: t for t, k in enumerate(free)}
    # Fixed-value half-spaces x[k] <= c (k < p) and x[k] >= c (k > p) are
    # projected exactly by clipping; chain edges by pairwise averaging.
    x = y[free].astype(float).tolist()
    ops = []
    for k in range(n - 1):
        a, b = k, k + 1
        if a == p:
            ops.append(("lower", idx[b]))
        elif b == p:
            ops.append(("upper", idx[a]))
        else:
            ops.append(("edge", idx[a], idx[b]))
    incs = [[0.0, 0.0] for _ in ops]
    for _ in range(kw.get("max_sweeps", 100_000)):
        change = 0.0
        for e, op in enumerate(ops):
            if op[0] == "edge":
                i, j = op[1], op[2]
                zi, zj = x[i] + incs[e][0], x[j] + incs[e][1]
                xi, xj = (0.5 * (zi + zj),) * 2 if zi > zj else (zi, zj)
                incs[e] = [zi - xi, zj - xj]
                change = max(change, abs(xi - x[i]), abs(xj - x[j]))
                x[i], x[j] = xi, xj
            else:
                i = op[1]
                z = x[i] + incs[e][0]
                xi = min(z, c) if op[0] == "upper" else max(z, c)
                incs[e][0] = z - xi
                change = max(change, abs(xi - x[i]))
                x[i] = xi
        if change < kw.get("tol", 1e-14):
            break
    out = np.empty(n)
    out[free] = x
    out[p] = c
    return out


def brute_route(tree, x):
    """Leaf id reached by following split predicates one node at a time."""
    node = tree.node(tree.root)
    while not node.is_leaf:
        node = tree.node(node.left if x[node.feature] <= node.threshold else node.right)
    return node.id


def all_pairs_overlap(left_cells, right_cells, drop):
    out = []
    for lc in left_cells:
        for rc in right_cells:
            ok = True
            for j in range(len(lc.lower)):
                lo = max(lc.lower[j], rc.lower[j])
                hi = min(lc.upper[j], rc.upper[j])
                if j == drop:
                    # Cells must at least be non-empty along the dropped axis.
                    if not (lc.lower[j] < lc.upper[j] and rc.lower[j] < rc.upper[j]):
                        ok = False
                elif not lo < hi:
                    ok = False
            if ok:
                out.append((lc.leaf, rc.leaf))
    return sorted(out)


def iiso_grid_oracle(vectors, pivots, step, margin=0.01):
    """Minimize the pinned-fit objective over a grid of intersection values.

    ``pivots`` are 1-based. Tails are fit with scikit-learn's isotonic
    regression, then every grid value of c is evaluated in one vectorized
    pass. Returns (best c, best objective).
    """
    from sklearn.isotonic import isotonic_regression

    def iso(a):
        return isotonic_regression(a) if len(a) else a

    allv = np.concatenate([np.asarray(v, dtype=float) for v in vectors])
    cs = np.arange(allv.min() - margin, allv.max() + margin + step / 2, step)
    g = np.zeros_like(cs)
    for v, p in zip(vectors, pivots):
        v = np.asarray(v, dtype=float)
        i = p - 1
        l, r = v[:i], v[i + 1:]
        lh, rh = iso(l), iso(r)
        g += (cs - v[i]) ** 2
        if len(l):
            g += np.sum((l[None, :] - np.minimum(lh[None, :], cs[:, None])) ** 2, axis=1)
        if len(r):
            g += np.sum((r[None, :] - np.maximum(rh[None, :], cs[:, None])) ** 2, axis=1)
    k = int(np.argmin(g))
    return float(cs[k]), float(g[k])
