# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the clustering engines.

Every routine here has a twin in ``_kernels_py`` that performs the same
floating-point operations in the same order, so both backends return
bit-identical results. Keep them in lockstep.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def pairwise_euclidean(const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double s, diff
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for c in range(d):
                diff = x[i, c] - x[j, c]
                s += diff * diff
            s = sqrt(s)
            out[i, j] = s
            out[j, i] = s
    return out_arr


cdef double _sqdist(const double[:, ::1] x, Py_ssize_t i,
                    double[:, ::1] centers, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t c
    cdef double s = 0.0, diff
    for c in range(x.shape[1]):
        diff = x[i, c] - centers[j, c]
        s += diff * diff
    return s


def lloyd(const double[:, ::1] x, double[:, ::1] centers, int max_iter):
    """Lloyd iterations from the given centers (modified in place).

    Returns ``(labels, trace)`` where ``trace`` holds the objective after
    each centroid update.
    """
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = centers.shape[0]
    cdef Py_ssize_t i, j, c, e, it, best, far
    cdef double dist, best_d, far_d, obj
    cdef bint changed
    labels_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = labels_arr
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    sums_arr = np.zeros((k, d), dtype=np.float64)
    cdef double[:, ::1] sums = sums_arr
    trace = []

    for it in range(max_iter):
        changed = False
        for i in range(n):
            best = 0
            best_d = _sqdist(x, i, centers, 0)
            for j in range(1, k):
                dist = _sqdist(x, i, centers, j)
                if dist < best_d:
                    best_d = dist
                    best = j
            if labels[i] != best:
                labels[i] = best
                changed = True

        counts[:] = 0
        for i in range(n):
            counts[labels[i]] += 1
        for e in range(k):
            if counts[e] != 0:
                continue
            far = -1
            far_d = -1.0
            for i in range(n):
                if counts[labels[i]] < 2:
                    continue
                dist = _sqdist(x, i, centers, labels[i])
                if dist > far_d:
                    far_d = dist
                    far = i
            counts[labels[far]] -= 1
            labels[far] = e
            counts[e] = 1
            for c in range(d):
                centers[e, c] = x[far, c]
            changed = True

        sums[:, :] = 0.0
        for i in range(n):
            for c in range(d):
                sums[labels[i], c] += x[i, c]
        for j in range(k):
            for c in range(d):
                centers[j, c] = sums[j, c] / counts[j]

        obj = 0.0
        for i in range(n):
            obj += _sqdist(x, i, centers, labels[i])
        trace.append(obj)
        if not changed:
            break
    return labels_arr, np.asarray(trace, dtype=np.float64)


cdef void _nearest_two(double[:, ::1] dmat, cnp.int64_t[::1] medoids,
                      cnp.int64_t[::1] near_slot, double[::1] near_d,
                      double[::1] second_d) noexcept nogil:
    cdef Py_ssize_t n = dmat.shape[0], k = medoids.shape[0]
    cdef Py_ssize_t i, s
    cdef double v
    for i in range(n):
        near_slot[i] = 0
        near_d[i] = dmat[i, medoids[0]]
        second_d[i] = INFINITY
        for s in range(1, k):
            v = dmat[i, medoids[s]]
            if v < near_d[i]:
                second_d[i] = near_d[i]
                near_d[i] = v
                near_slot[i] = s
            elif v < second_d[i]:
                second_d[i] = v


def pam_build(double[:, ::1] dmat, int k):
    """Greedy BUILD: start from the most central point, then add the point
    with the largest total cost reduction. Ties go to the smaller index."""
    cdef Py_ssize_t n = dmat.shape[0]
    cdef Py_ssize_t i, h, m, best
    cdef double tot, best_v, gain
    medoids_arr = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] medoids = medoids_arr
    is_med_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] is_med = is_med_arr
    near_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] near = near_arr

    best = 0
    best_v = 0.0
    for h in range(n):
        tot = 0.0
        for i in range(n):
            tot += dmat[i, h]
        if h == 0 or tot < best_v:
            best_v = tot
            best = h
    medoids[0] = best
    is_med[best] = 1
    for i in range(n):
        near[i] = dmat[i, best]

    for m in range(1, k):
        best = -1
        best_v = -1.0
        for h in range(n):
            if is_med[h]:
                continue
            gain = 0.0
            for i in range(n):
                if near[i] > dmat[i, h]:
                    gain += near[i] - dmat[i, h]
            if gain > best_v:
                best_v = gain
                best = h
        medoids[m] = best
        is_med[best] = 1
        for i in range(n):
            if dmat[i, best] < near[i]:
                near[i] = dmat[i, best]
    return medoids_arr


def pam_swap(double[:, ::1] dmat, cnp.int64_t[::1] medoids, int max_iter, double tol):
    """SWAP phase, best-improvement. ``medoids`` is modified in place.

    Returns the number of swaps applied.
    """
    cdef Py_ssize_t n = dmat.shape[0], k = medoids.shape[0]
    cdef Py_ssize_t i, s, h, best_s, best_h
    cdef double delta, best_delta, new, dih
    cdef int it, swaps = 0
    near_slot_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] near_slot = near_slot_arr
    near_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] near_d = near_arr
    second_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] second_d = second_arr
    is_med_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] is_med = is_med_arr

    for it in range(max_iter):
        _nearest_two(dmat, medoids, near_slot, near_d, second_d)
        is_med[:] = 0
        for s in range(k):
            is_med[medoids[s]] = 1
        best_delta = -tol
        best_s = -1
        best_h = -1
        for s in range(k):
            for h in range(n):
                if is_med[h]:
                    continue
                delta = 0.0
                for i in range(n):
                    dih = dmat[i, h]
                    if near_slot[i] == s:
                        new = dih if dih < second_d[i] else second_d[i]
                    else:
                        new = dih if dih < near_d[i] else near_d[i]
                    delta += new - near_d[i]
                if delta < best_delta:
                    best_delta = delta
                    best_s = s
                    best_h = h
        if best_s < 0:
            break
        medoids[best_s] = best_h
        swaps += 1
    return swaps


def agglomerate(double[:, ::1] dmat, int k, int method):
    """Lance-Williams agglomeration down to ``k`` clusters.

    ``method``: 0 single, 1 complete, 2 average. Clusters live in the slot of
    their smallest member; the closest active pair is merged, ties going to
    the lexicographically smallest ``(i, j)``. Returns ``(owner, heights)``
    where ``owner[p]`` is the slot holding point ``p``.
    """
    cdef Py_ssize_t n = dmat.shape[0]
    cdef Py_ssize_t i, j, m, p, bi, bj, n_active = n
    cdef double best, v, a, b
    d_arr = np.array(dmat, dtype=np.float64, copy=True)
    cdef double[:, ::1] dd = d_arr
    active_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] active = active_arr
    size_arr = np.ones(n, dtype=np.float64)
    cdef double[::1] size = size_arr
    owner_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] owner = owner_arr
    heights = []

    while n_active > k:
        bi = -1
        bj = -1
        best = 0.0
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if not active[j]:
                    continue
                v = dd[i, j]
                if bi < 0 or v < best:
                    best = v
                    bi = i
                    bj = j
        heights.append(best)
        for m in range(n):
            if not active[m] or m == bi or m == bj:
                continue
            a = dd[bi, m]
            b = dd[bj, m]
            if method == 0:
                v = a if a < b else b
            elif method == 1:
                v = a if a > b else b
            else:
                v = (size[bi] * a + size[bj] * b) / (size[bi] + size[bj])
            dd[bi, m] = v
            dd[m, bi] = v
        size[bi] += size[bj]
        active[bj] = 0
        for p in range(n):
            if owner[p] == bj:
                owner[p] = bi
        n_active -= 1
    return owner_arr, np.asarray(heights, dtype=np.float64)
