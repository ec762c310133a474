"""Clustering engines: k-means, PAM, agglomerative and fuzzy c-means.

All engines take a fully present numeric :class:`Matrix` and return hard
:class:`Partition` objects (fuzzy memberships via :func:`harden`). Every
tie is broken toward the smallest index so downstream consensus is
reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .datamodel import DataError, Dataset

logger = logging.getLogger(__name__)

LINKAGES = {"single": 0, "complete": 1, "average": 2}
ENGINES = ("kmeans", "pam", "hierarchical", "fcm")

Seed = int | Sequence[int] | np.random.SeedSequence


@dataclass(frozen=True, eq=False)
class Matrix:
    values: np.ndarray
    scaled: bool = False
    columns: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if not np.isfinite(v).all():
            raise DataError("matrix has missing or non-finite cells")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Partition:
    labels: np.ndarray
    k: int
    objective: float = 0.0
    trace: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if self.k < 1 or labels.size < self.k:
            raise ValueError(f"invalid partition: k={self.k}, n={labels.size}")
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValueError("labels out of range")
        if np.bincount(labels, minlength=self.k).min() == 0:
            raise ValueError("partition has an empty cluster")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass(frozen=True, eq=False)
class FuzzyMembership:
    u: np.ndarray
    m: float
    centers: np.ndarray | None = None
    objective: float = 0.0
    n_iter: int = 0

    def __post_init__(self):
        if self.m <= 1:
            raise ValueError("fuzzifier must exceed 1")
        u = np.asarray(self.u, dtype=np.float64)
        if u.ndim != 2 or (u < 0).any() or (u > 1).any():
            raise ValueError("memberships must be an n x k matrix in [0, 1]")
        if not np.allclose(u.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("membership rows must sum to 1")


def _check_k(x: Matrix, k: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > x.n:
        raise ValueError(f"k={k} exceeds the number of rows ({x.n})")


def prepare_matrix(d: Dataset) -> Matrix:
    """Numeric matrix of the marker/clinical attributes of an imputed dataset.

    Binary columns pass through, continuous columns are min-max scaled to
    [0, 1] (a constant column becomes 0 and is reported in ``warnings``),
    categorical columns are one-hot encoded.
    """
    cols, names, warns = [], [], []
    for j, s in enumerate(d.specs):
        if not s.clusterable:
            continue
        if d.missing[:, j].any():
            raise DataError(f"attribute {s.name!r} still has missing cells; impute first")
        v = d.values[:, j]
        if s.kind == "binary":
            cols.append(v)
            names.append(s.name)
        elif s.kind == "continuous":
            lo, hi = v.min(), v.max()
            if hi > lo:
                cols.append((v - lo) / (hi - lo))
            else:
                cols.append(np.zeros_like(v))
                warns.append(f"constant continuous attribute {s.name!r} scaled to 0")
            names.append(s.name)
        else:
            for level in np.unique(v):
                cols.append((v == level).astype(np.float64))
                names.append(f"{s.name}={_fmt_level(level)}")
    if not cols:
        raise DataError("no marker or clinical attributes to cluster on")
    for w in warns:
        logger.warning(w)
    scaled = any(s.kind == "continuous" for s in d.specs if s.clusterable)
    return Matrix(np.column_stack(cols), scaled=scaled, columns=tuple(names), warnings=tuple(warns))


def _fmt_level(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _as_matrix(x) -> Matrix:
    return x if isinstance(x, Matrix) else Matrix(np.asarray(x, dtype=np.float64))


def sse(x: np.ndarray, labels: np.ndarray, k: int) -> float:
    total = 0.0
    for c in range(k):
        pts = x[labels == c]
        if len(pts):
            total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def kmeans(x, k: int, seed: Seed = 0, restarts: int = 32, max_iter: int = 300) -> Partition:
    """Lloyd's algorithm with restarts from ``k`` distinct sampled rows.

    The restart with the lowest objective wins (lowest restart index on a
    tie). ``Partition.trace`` holds the per-iteration objectives of the
    winning restart.
    """
    x = _as_matrix(x)
    _check_k(x, k)
    if restarts < 1 or max_iter < 1:
        raise ValueError("restarts and max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        init = x.values[rng.choice(x.n, size=k, replace=False)].copy()
        labels, trace = kernels.lloyd(x.values, init, max_iter)
        if best is None or trace[-1] < best[1][-1]:
            best = (labels, trace)
    labels, trace = best
    return Partition(labels, k, float(trace[-1]), tuple(float(t) for t in trace))


def distance_matrix(x) -> np.ndarray:
    return kernels.pairwise_euclidean(_as_matrix(x).values)


def pam(x, k: int, seed: Seed = 0, max_iter: int = 100, dmat: np.ndarray | None = None) -> Partition:
    """Partitioning around medoids: BUILD then best-improvement SWAP.

    Both phases are deterministic, so ``seed`` does not change the result;
    it is accepted for a uniform engine signature.
    """
    x = _as_matrix(x)
    _check_k(x, k)
    D = distance_matrix(x) if dmat is None else np.ascontiguousarray(dmat, dtype=np.float64)
    medoids = kernels.pam_build(D, k)
    tol = 1e-10 * max(1.0, float(D.max(initial=0.0)))
    kernels.pam_swap(D, medoids, max_iter, tol)
    medoids = np.asarray(medoids, dtype=np.int64)
    labels = np.argmin(D[:, medoids], axis=1)
    # coincident medoids would leave a slot empty
    labels[medoids] = np.arange(k)
    objective = float(D[np.arange(x.n), medoids[labels]].sum())
    return Partition(labels, k, objective)


def hierarchical(x, k: int, linkage: str = "average", dmat: np.ndarray | None = None) -> Partition:
    """Agglomerative clustering cut at ``k`` clusters.

    Clusters are numbered by their smallest member. The objective is the
    linkage height of the last merge performed (0 when ``k == n``).
    """
    x = _as_matrix(x)
    _check_k(x, k)
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    D = distance_matrix(x) if dmat is None else np.ascontiguousarray(dmat, dtype=np.float64)
    owner, heights = kernels.agglomerate(D, k, LINKAGES[linkage])
    _, labels = np.unique(owner, return_inverse=True)
    return Partition(labels, k, float(heights[-1]) if len(heights) else 0.0)


def _fcm_memberships(sqd: np.ndarray, m: float) -> np.ndarray:
    """u_ij from squared point-center distances (n x k)."""
    n, k = sqd.shape
    u = np.empty_like(sqd)
    zero = sqd <= 0.0
    hit = zero.any(axis=1)
    if hit.any():
        # a point sitting on a center belongs to it (first such center) entirely
        first = np.argmax(zero[hit], axis=1)
        u[hit] = 0.0
        u[np.flatnonzero(hit), first] = 1.0
    rest = ~hit
    if rest.any():
        p = 1.0 / (m - 1.0)
        ratio = (sqd[rest][:, :, None] / sqd[rest][:, None, :]) ** p
        u[rest] = 1.0 / ratio.sum(axis=2)
        u[rest] /= u[rest].sum(axis=1, keepdims=True)
    return u


def _sqdist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def fuzzy_cmeans(
    x,
    k: int,
    m: float = 2.0,
    seed: Seed = 0,
    eps: float = 1e-6,
    max_iter: int = 300,
    restarts: int = 4,
) -> FuzzyMembership:
    """Fuzzy c-means with centers initialised on ``k`` distinct sampled rows.

    Iterates memberships and centers until the largest membership change
    drops below ``eps``. Of ``restarts`` runs the one with the lowest fuzzy
    objective is returned.
    """
    x = _as_matrix(x)
    _check_k(x, k)
    if m <= 1:
        raise ValueError("fuzzifier m must exceed 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    X = x.values
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centers = X[rng.choice(x.n, size=k, replace=False)].copy()
        u = _fcm_memberships(_sqdist(X, centers), m)
        it = 0
        for it in range(1, max_iter + 1):
            w = u ** m
            centers = (w.T @ X) / w.sum(axis=0)[:, None]
            u_new = _fcm_memberships(_sqdist(X, centers), m)
            delta = np.abs(u_new - u).max()
            u = u_new
            if delta < eps:
                break
        obj = float(((u ** m) * _sqdist(X, centers)).sum())
        if best is None or obj < best.objective:
            best = FuzzyMembership(u, m, centers, obj, it)
    return best


def harden(fm: FuzzyMembership) -> Partition:
    """Argmax memberships (ties to the smaller label).

    A cluster left without an argmax winner receives the point with the
    highest membership in it, so the result is always a valid partition.
    """
    u = np.asarray(fm.u)
    n, k = u.shape
    labels = np.argmax(u, axis=1)
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        donors = counts[labels] > 1
        score = np.where(donors, u[:, c], -np.inf)
        i = int(np.argmax(score))
        counts[labels[i]] -= 1
        labels[i] = c
        counts[c] += 1
    return Partition(labels, k, fm.objective)


@dataclass(frozen=True)
class EngineParams:
    restarts: int = 32
    max_iter: int = 300
    pam_max_iter: int = 100
    linkage: str = "average"
    fuzzifier: float = 2.0
    fcm_eps: float = 1e-6
    fcm_restarts: int = 4


def run_engine(name: str, x: Matrix, k: int, seed: Seed, params: EngineParams = EngineParams(), dmat=None) -> Partition:
    if name == "kmeans":
        return kmeans(x, k, seed=seed, restarts=params.restarts, max_iter=params.max_iter)
    if name == "pam":
        return pam(x, k, seed=seed, max_iter=params.pam_max_iter, dmat=dmat)
    if name == "hierarchical":
        return hierarchical(x, k, linkage=params.linkage, dmat=dmat)
    if name == "fcm":
        fm = fuzzy_cmeans(
            x, k, m=params.fuzzifier, seed=seed, eps=params.fcm_eps,
            max_iter=params.max_iter, restarts=params.fcm_restarts,
        )
        return harden(fm)
    raise ValueError(f"unknown engine {name!r}")


def run_all(x: Matrix, k: int, seed: int, params: EngineParams = EngineParams(), engines=ENGINES) -> dict[str, Partition]:
    """Every engine at the same ``k``; each stochastic engine gets its own seed stream."""
    D = distance_matrix(x)
    return {
        name: run_engine(name, x, k, [seed, i], params, dmat=D)
        for i, name in enumerate(engines)
    }
