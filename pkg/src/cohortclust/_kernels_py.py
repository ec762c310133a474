"""Numpy twins of the compiled kernels in ``_kernels.pyx``.

Reductions are written as sequential accumulations (explicit loops over
the feature axis, ``bincount``, ``cumsum``) rather than ``np.sum`` so the
floating-point operation order matches the C loops exactly.
"""
from __future__ import annotations

import numpy as np


def _seqsum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    if a.shape[axis] == 0:
        return np.zeros(np.delete(a.shape, axis))
    return np.take(np.cumsum(a, axis=axis), -1, axis=axis)


def _sqdist_to(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """n x k squared distances, accumulated feature by feature."""
    out = np.zeros((x.shape[0], centers.shape[0]))
    for c in range(x.shape[1]):
        diff = x[:, c, None] - centers[None, :, c]
        out += diff * diff
    return out


def _sqdist_rows(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for c in range(x.shape[1]):
        diff = x[:, c] - rows[:, c]
        out += diff * diff
    return out


def pairwise_euclidean(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros((n, n))
    for c in range(x.shape[1]):
        diff = x[:, c, None] - x[None, :, c]
        out += diff * diff
    out = np.sqrt(out)
    np.fill_diagonal(out, 0.0)
    return out


def lloyd(x, centers, max_iter):
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    k = centers.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    trace = []
    for _ in range(max_iter):
        best = np.argmin(_sqdist_to(x, centers), axis=1).astype(np.int64)
        changed = bool(np.any(best != labels))
        labels = best

        counts = np.bincount(labels, minlength=k)
        for e in range(k):
            if counts[e] != 0:
                continue
            dist = _sqdist_rows(x, centers[labels])
            dist[counts[labels] < 2] = -np.inf
            far = int(np.argmax(dist))
            counts[labels[far]] -= 1
            labels[far] = e
            counts[e] = 1
            centers[e] = x[far]
            changed = True

        for c in range(d):
            centers[:, c] = np.bincount(labels, weights=x[:, c], minlength=k) / counts
        trace.append(float(_seqsum(_sqdist_rows(x, centers[labels]))))
        if not changed:
            break
    return labels, np.asarray(trace, dtype=np.float64)


def pam_build(dmat, k):
    n = dmat.shape[0]
    medoids = np.empty(k, dtype=np.int64)
    medoids[0] = int(np.argmin(_seqsum(dmat, axis=0)))
    near = dmat[:, medoids[0]].copy()
    is_med = np.zeros(n, dtype=bool)
    is_med[medoids[0]] = True
    for m in range(1, k):
        gain = _seqsum(np.where(near[:, None] > dmat, near[:, None] - dmat, 0.0), axis=0)
        gain[is_med] = -np.inf
        best = int(np.argmax(gain))
        medoids[m] = best
        is_med[best] = True
        near = np.minimum(near, dmat[:, best])
    return medoids


def _nearest_two(dmat, medoids):
    n = dmat.shape[0]
    near_slot = np.zeros(n, dtype=np.int64)
    near_d = dmat[:, medoids[0]].copy()
    second_d = np.full(n, np.inf)
    for s in range(1, len(medoids)):
        v = dmat[:, medoids[s]]
        closer = v < near_d
        runner = ~closer & (v < second_d)
        second_d = np.where(closer, near_d, np.where(runner, v, second_d))
        near_d = np.where(closer, v, near_d)
        near_slot[closer] = s
    return near_slot, near_d, second_d


def pam_swap(dmat, medoids, max_iter, tol):
    n = dmat.shape[0]
    swaps = 0
    for _ in range(max_iter):
        near_slot, near_d, second_d = _nearest_two(dmat, medoids)
        is_med = np.zeros(n, dtype=bool)
        is_med[medoids] = True
        best_delta, best_s, best_h = -tol, -1, -1
        for s in range(len(medoids)):
            cap = np.where(near_slot == s, second_d, near_d)
            new = np.where(dmat < cap[:, None], dmat, cap[:, None])
            delta = _seqsum(new - near_d[:, None], axis=0)
            delta[is_med] = np.inf
            h = int(np.argmin(delta))
            if delta[h] < best_delta:
                best_delta, best_s, best_h = delta[h], s, h
        if best_s < 0:
            break
        medoids[best_s] = best_h
        swaps += 1
    return swaps


def agglomerate(dmat, k, method):
    n = dmat.shape[0]
    dd = np.array(dmat, dtype=np.float64, copy=True)
    active = np.ones(n, dtype=bool)
    size = np.ones(n)
    owner = np.arange(n, dtype=np.int64)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    heights = []
    n_active = n
    while n_active > k:
        ok = upper & active[:, None] & active[None, :]
        flat = int(np.argmin(np.where(ok, dd, np.inf)))
        bi, bj = divmod(flat, n)
        heights.append(dd[bi, bj])
        others = active.copy()
        others[[bi, bj]] = False
        a = dd[bi, others]
        b = dd[bj, others]
        if method == 0:
            v = np.where(a < b, a, b)
        elif method == 1:
            v = np.where(a > b, a, b)
        else:
            v = (size[bi] * a + size[bj] * b) / (size[bi] + size[bj])
        dd[bi, others] = v
        dd[others, bi] = v
        size[bi] += size[bj]
        active[bj] = False
        owner[owner == bj] = bi
        n_active -= 1
    return owner, np.asarray(heights, dtype=np.float64)
