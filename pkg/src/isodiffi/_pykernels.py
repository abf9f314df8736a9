"""Pure numpy implementation of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point operation order, so both backends give
bit-identical trees, depths and importances.

Trees are stored as flat arrays indexed by node id (preorder). Leaves have
``feature == -1`` and ``left == right == -1``. A packed forest concatenates
the per-tree arrays and stores absolute child ids plus one root id per tree.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def build_tree(X: np.ndarray, uniforms: np.ndarray, h_max: int):
    """Grow one isolation tree on the in-bag rows ``X``.

    ``uniforms[k]`` holds the two U[0, 1) draws consumed by the k-th internal
    node in preorder: the first picks the split feature among the
    non-constant ones, the second places the threshold between min and max.

    Returns ``(feature, threshold, left, right, n_samples, depth)``.
    """
    psi = X.shape[0]
    cap = 2 * psi - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    n_samples = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    counters = [0, 0]  # nodes allocated, internal nodes allocated

    def grow(idx: np.ndarray, d: int) -> int:
        nid = counters[0]
        counters[0] += 1
        n_samples[nid] = idx.size
        depth[nid] = d
        if idx.size <= 1 or d >= h_max:
            return nid
        sub = X[idx]
        mn = sub.min(axis=0)
        mx = sub.max(axis=0)
        cand = np.flatnonzero(mx > mn)
        if cand.size == 0:
            return nid
        u0, u1 = uniforms[counters[1]]
        counters[1] += 1
        j = int(u0 * cand.size)
        if j >= cand.size:
            j = cand.size - 1
        f = cand[j]
        lo = mn[f]
        hi = mx[f]
        tau = lo + u1 * (hi - lo)
        if not (tau > lo and tau <= hi):
            tau = hi
        mask = sub[:, f] < tau
        feature[nid] = f
        threshold[nid] = tau
        left[nid] = grow(idx[mask], d + 1)
        right[nid] = grow(idx[~mask], d + 1)
        return nid

    grow(np.arange(psi), 0)
    m = counters[0]
    return (
        feature[:m].copy(),
        threshold[:m].copy(),
        left[:m].copy(),
        right[:m].copy(),
        n_samples[:m].copy(),
        depth[:m].copy(),
    )


def _walk(feature, threshold, left, right, start, X):
    """Yield node matrices level by level; ``start`` has shape (n, T)."""
    node = start.copy()
    rows = np.arange(X.shape[0])[:, None]
    while True:
        f = feature[node]
        internal = f >= 0
        yield node, internal
        if not internal.any():
            return
        values = X[rows, np.where(internal, f, 0)]
        nxt = np.where(values < threshold[node], left[node], right[node])
        node = np.where(internal, nxt, node)


def forest_apply(feature, threshold, left, right, roots, X):
    """Leaf id reached by every row of ``X`` in every tree, shape (n, T)."""
    start = np.broadcast_to(roots, (X.shape[0], roots.size))
    node = start
    for node, _ in _walk(feature, threshold, left, right, start, X):
        pass
    return np.ascontiguousarray(node, dtype=np.int64)


def tree_accumulate(feature, threshold, left, right, node_weight, root, X, point_weight, p):
    """Walk each row of ``X`` from ``root``; at every internal node v add
    ``node_weight[v] * point_weight[i]`` to ``I[feature[v]]`` and 1 to ``C``.

    Rows are processed in order and nodes along each path in root-to-leaf
    order.
    """
    n = X.shape[0]
    if n == 0:
        return np.zeros(p), np.zeros(p, dtype=np.int64)
    start = np.full((n, 1), root, dtype=np.int64)
    feats, weights = [], []
    for node, internal in _walk(feature, threshold, left, right, start, X):
        node = node[:, 0]
        internal = internal[:, 0]
        feats.append(np.where(internal, feature[node], -1))
        weights.append(node_weight[node] * point_weight)
    # row-major flattening reproduces the per-row, per-level summation order
    f = np.stack(feats, axis=1).ravel()
    w = np.stack(weights, axis=1).ravel()
    keep = f >= 0
    I = np.bincount(f[keep], weights=w[keep], minlength=p).astype(np.float64)
    C = np.bincount(f[keep], minlength=p).astype(np.int64)
    return I, C


def forest_local(feature, threshold, left, right, depth, roots, x, h_max, p):
    """Local importance increments of one point over every tree.

    Tree t contributes ``1/h_t(x) - 1/h_max`` for each internal node on the
    path of ``x``. Trees are processed in order; root-only trees are skipped.
    """
    X = x.reshape(1, -1)
    start = roots.reshape(1, -1)
    feats = []
    node = start
    for node, internal in _walk(feature, threshold, left, right, start, X):
        feats.append(np.where(internal[0], feature[node[0]], -1))
    h = depth[node[0]]
    with np.errstate(divide="ignore"):
        delta = 1.0 / h - 1.0 / h_max
    f = np.stack(feats, axis=1)  # (T, levels)
    w = np.broadcast_to(delta[:, None], f.shape)
    f = f.ravel()
    w = w.ravel()
    keep = f >= 0
    I = np.bincount(f[keep], weights=w[keep], minlength=p).astype(np.float64)
    C = np.bincount(f[keep], minlength=p).astype(np.int64)
    return I, C


def tree_occupancy(feature, threshold, left, right, depth, root, X):
    """Number of rows of ``X`` passing through each node of one tree."""
    m = feature.size
    n = X.shape[0]
    if n == 0:
        return np.zeros(m, dtype=np.int64)
    start = np.full((n, 1), root, dtype=np.int64)
    visited = []
    for level, (node, _) in enumerate(_walk(feature, threshold, left, right, start, X)):
        node = node[:, 0]
        # finished rows keep re-reporting their leaf; count a node once, at its own depth
        visited.append(node[depth[node] - depth[root] == level])
    return np.bincount(np.concatenate(visited) - root, minlength=m).astype(np.int64)
