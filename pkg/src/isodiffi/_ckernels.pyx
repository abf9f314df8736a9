# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same signatures and operation order as ``_pykernels``."""

import numpy as np

NAME = "cython"


def build_tree(const double[:, ::1] X, const double[:, ::1] uniforms, Py_ssize_t h_max):
    cdef Py_ssize_t psi = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t cap = 2 * psi - 1

    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    n_samples_a = np.zeros(cap, dtype=np.int64)
    depth_a = np.zeros(cap, dtype=np.int64)
    cdef long long[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef long long[::1] left = left_a
    cdef long long[::1] right = right_a
    cdef long long[::1] n_samples = n_samples_a
    cdef long long[::1] depth = depth_a

    cdef Py_ssize_t[::1] idx = np.arange(psi, dtype=np.intp)
    cdef double[::1] mn = np.empty(p, dtype=np.float64)
    cdef double[::1] mx = np.empty(p, dtype=np.float64)
    cdef Py_ssize_t[::1] cand = np.empty(p, dtype=np.intp)

    # explicit stack emulating preorder recursion (push right, then left)
    cdef Py_ssize_t[::1] st_start = np.empty(cap, dtype=np.intp)
    cdef Py_ssize_t[::1] st_end = np.empty(cap, dtype=np.intp)
    cdef Py_ssize_t[::1] st_depth = np.empty(cap, dtype=np.intp)
    cdef Py_ssize_t[::1] st_parent = np.empty(cap, dtype=np.intp)
    cdef char[::1] st_side = np.empty(cap, dtype=np.int8)

    cdef Py_ssize_t top = 0, n_nodes = 0, n_internal = 0
    cdef Py_ssize_t s, e, d, parent, nid, size, i, j, f, ncand, lo_ptr, hi_ptr, tmp
    cdef char side
    cdef double v, lo, hi, tau, u0, u1

    with nogil:
        st_start[0] = 0
        st_end[0] = psi
        st_depth[0] = 0
        st_parent[0] = -1
        st_side[0] = 0
        top = 1
        while top > 0:
            top -= 1
            s = st_start[top]
            e = st_end[top]
            d = st_depth[top]
            parent = st_parent[top]
            side = st_side[top]

            nid = n_nodes
            n_nodes += 1
            if parent >= 0:
                if side == 0:
                    left[parent] = nid
                else:
                    right[parent] = nid
            size = e - s
            n_samples[nid] = size
            depth[nid] = d
            if size <= 1 or d >= h_max:
                continue

            for j in range(p):
                mn[j] = X[idx[s], j]
                mx[j] = X[idx[s], j]
            for i in range(s + 1, e):
                for j in range(p):
                    v = X[idx[i], j]
                    if v < mn[j]:
                        mn[j] = v
                    if v > mx[j]:
                        mx[j] = v
            ncand = 0
            for j in range(p):
                if mx[j] > mn[j]:
                    cand[ncand] = j
                    ncand += 1
            if ncand == 0:
                continue

            u0 = uniforms[n_internal, 0]
            u1 = uniforms[n_internal, 1]
            n_internal += 1
            j = <Py_ssize_t>(u0 * ncand)
            if j >= ncand:
                j = ncand - 1
            f = cand[j]
            lo = mn[f]
            hi = mx[f]
            tau = lo + u1 * (hi - lo)
            if not (tau > lo and tau <= hi):
                tau = hi

            # partition idx[s:e] so rows with value < tau come first
            lo_ptr = s
            hi_ptr = e - 1
            while lo_ptr <= hi_ptr:
                if X[idx[lo_ptr], f] < tau:
                    lo_ptr += 1
                else:
                    tmp = idx[lo_ptr]
                    idx[lo_ptr] = idx[hi_ptr]
                    idx[hi_ptr] = tmp
                    hi_ptr -= 1

            feature[nid] = f
            threshold[nid] = tau

            st_start[top] = lo_ptr
            st_end[top] = e
            st_depth[top] = d + 1
            st_parent[top] = nid
            st_side[top] = 1
            top += 1
            st_start[top] = s
            st_end[top] = lo_ptr
            st_depth[top] = d + 1
            st_parent[top] = nid
            st_side[top] = 0
            top += 1

    m = n_nodes
    return (
        feature_a[:m].copy(),
        threshold_a[:m].copy(),
        left_a[:m].copy(),
        right_a[:m].copy(),
        n_samples_a[:m].copy(),
        depth_a[:m].copy(),
    )


def forest_apply(const long long[::1] feature, const double[::1] threshold,
                 const long long[::1] left, const long long[::1] right,
                 const long long[::1] roots, const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t T = roots.shape[0]
    out_a = np.empty((n, T), dtype=np.int64)
    cdef long long[:, ::1] out = out_a
    cdef Py_ssize_t i, t
    cdef long long node, f
    with nogil:
        for i in range(n):
            for t in range(T):
                node = roots[t]
                f = feature[node]
                while f >= 0:
                    if X[i, f] < threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                    f = feature[node]
                out[i, t] = node
    return out_a


def tree_accumulate(const long long[::1] feature, const double[::1] threshold,
                    const long long[::1] left, const long long[::1] right,
                    const double[::1] node_weight, long long root,
                    const double[:, ::1] X, const double[::1] point_weight,
                    Py_ssize_t p):
    I_a = np.zeros(p, dtype=np.float64)
    C_a = np.zeros(p, dtype=np.int64)
    cdef double[::1] I = I_a
    cdef long long[::1] C = C_a
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef long long node, f
    cdef double w
    with nogil:
        for i in range(n):
            w = point_weight[i]
            node = root
            f = feature[node]
            while f >= 0:
                I[f] += node_weight[node] * w
                C[f] += 1
                if X[i, f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
    return I_a, C_a


def forest_local(const long long[::1] feature, const double[::1] threshold,
                 const long long[::1] left, const long long[::1] right,
                 const long long[::1] depth, const long long[::1] roots,
                 const double[::1] x, Py_ssize_t h_max, Py_ssize_t p):
    I_a = np.zeros(p, dtype=np.float64)
    C_a = np.zeros(p, dtype=np.int64)
    cdef double[::1] I = I_a
    cdef long long[::1] C = C_a
    cdef Py_ssize_t T = roots.shape[0]
    cdef Py_ssize_t t
    cdef long long node, f, h
    cdef double delta
    with nogil:
        for t in range(T):
            node = roots[t]
            f = feature[node]
            while f >= 0:
                if x[f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            h = depth[node]
            if h == 0:
                continue
            delta = 1.0 / <double>h - 1.0 / <double>h_max
            node = roots[t]
            f = feature[node]
            while f >= 0:
                I[f] += delta
                C[f] += 1
                if x[f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
    return I_a, C_a


def tree_occupancy(const long long[::1] feature, const double[::1] threshold,
                   const long long[::1] left, const long long[::1] right,
                   const long long[::1] depth, long long root, const double[:, ::1] X):
    cdef Py_ssize_t m = feature.shape[0]
    counts_a = np.zeros(m, dtype=np.int64)
    cdef long long[::1] counts = counts_a
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef long long node, f
    with nogil:
        for i in range(n):
            node = root
            counts[node - root] += 1
            f = feature[node]
            while f >= 0:
                if X[i, f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                counts[node - root] += 1
                f = feature[node]
    return counts_a
