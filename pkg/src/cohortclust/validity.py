"""Cluster validity indices and the per-index choice of k.

Degenerate values are kept as floats internally: ``inf`` where an index
is unbounded (perfect separation, coincident centroids) and ``nan`` where
it is undefined for a given k. :func:`marker` turns them into the string
markers used in serialized output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .engines import EngineParams, Matrix, Partition, _as_matrix, distance_matrix, run_engine

MAXIMIZE = "maximize"
MINIMIZE = "minimize"
MAX_DIFF = "max_successive_difference"

POS_INF = "+INF"
NEG_INF = "-INF"
UNDEFINED = "UNDEFINED"


def marker(v: float):
    """JSON/CSV-safe form of a score."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return UNDEFINED
    if math.isinf(v):
        return POS_INF if v > 0 else NEG_INF
    return float(v)


def unmarker(v) -> float:
    if v == UNDEFINED:
        return math.nan
    if v == POS_INF:
        return math.inf
    if v == NEG_INF:
        return -math.inf
    return float(v)


@dataclass(frozen=True, eq=False)
class ScatterSummary:
    W: np.ndarray
    B: np.ndarray
    T: np.ndarray
    sizes: np.ndarray
    centroids: np.ndarray
    grand: np.ndarray

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return int(self.sizes.sum())


def scatter(x, p: Partition) -> ScatterSummary:
    X = _as_matrix(x).values
    if X.shape[0] != p.n:
        raise ValueError("partition and matrix disagree on n")
    grand = X.mean(axis=0)
    sizes = p.sizes()
    cents = np.zeros((p.k, X.shape[1]))
    W = np.zeros((X.shape[1], X.shape[1]))
    for c in range(p.k):
        pts = X[p.labels == c]
        cents[c] = pts.mean(axis=0)
        dev = pts - cents[c]
        W += dev.T @ dev
    gdev = cents - grand
    B = (gdev * sizes[:, None]).T @ gdev
    tdev = X - grand
    T = tdev.T @ tdev
    sym = lambda a: (a + a.T) / 2
    return ScatterSummary(sym(W), sym(B), sym(T), sizes, cents, grand)


def _ridge(s: ScatterSummary) -> float:
    trw = float(np.trace(s.W))
    return 1e-9 * trw / s.d if trw > 0 else 1e-12


def index_calinski_harabasz(s: ScatterSummary, n: int, k: int) -> float:
    if not 2 <= k < n:
        return math.nan
    trb, trw = float(np.trace(s.B)), float(np.trace(s.W))
    if trw <= 0:
        return math.inf if trb > 0 else 0.0
    return (trb / (k - 1)) / (trw / (n - k))


def _centroids(X: np.ndarray, p: Partition) -> np.ndarray:
    return np.array([X[p.labels == c].mean(axis=0) for c in range(p.k)])


def index_davies_bouldin(x, p: Partition) -> float:
    if p.k < 2:
        return math.nan
    X = _as_matrix(x).values
    cents = _centroids(X, p)
    spread = np.array([
        np.sqrt(((X[p.labels == c] - cents[c]) ** 2).sum(axis=1)).mean() for c in range(p.k)
    ])
    total = 0.0
    for i in range(p.k):
        worst = 0.0
        for j in range(p.k):
            if i == j:
                continue
            sep = float(np.sqrt(((cents[i] - cents[j]) ** 2).sum()))
            if sep == 0:
                return math.inf
            worst = max(worst, (spread[i] + spread[j]) / sep)
        total += worst
    return total / p.k


def _cluster_mean_distances(D: np.ndarray, p: Partition) -> np.ndarray:
    """n x k: sum of distances from each point to the members of each cluster."""
    onehot = np.zeros((p.n, p.k))
    onehot[np.arange(p.n), p.labels] = 1.0
    return D @ onehot


def index_silhouette(x, p: Partition, dmat: np.ndarray | None = None) -> float:
    if p.k < 2 or p.n < 3:
        return math.nan
    D = distance_matrix(x) if dmat is None else dmat
    sums = _cluster_mean_distances(D, p)
    sizes = p.sizes().astype(np.float64)
    idx = np.arange(p.n)
    own = sizes[p.labels]
    a = np.where(own > 1, sums[idx, p.labels] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes[None, :]
    other[idx, p.labels] = np.inf
    b = other.min(axis=1)
    den = np.maximum(a, b)
    s = np.where((own > 1) & (den > 0), (b - a) / np.where(den > 0, den, 1.0), 0.0)
    return float(s.mean())


def index_dunn(x, p: Partition, dmat: np.ndarray | None = None) -> float:
    if p.k < 2:
        return math.nan
    D = distance_matrix(x) if dmat is None else dmat
    same = p.labels[:, None] == p.labels[None, :]
    diam = float(D[same].max())
    sep = float(D[~same].min())
    if diam == 0:
        return math.inf
    return sep / diam


def index_friedman(s: ScatterSummary) -> float:
    """trace(W^-1 B) with a small ridge on W."""
    if s.k < 2:
        return math.nan
    eps = _ridge(s)
    Wr = s.W + eps * np.eye(s.d)
    return float(np.trace(np.linalg.solve(Wr, s.B)))


def index_scott(s: ScatterSummary, n: int) -> float:
    """n log(det T / det W), ridge-regularised like :func:`index_friedman`."""
    if s.k < 2:
        return math.nan
    eps = _ridge(s)
    eye = np.eye(s.d)
    sign_t, logdet_t = np.linalg.slogdet(s.T + eps * eye)
    sign_w, logdet_w = np.linalg.slogdet(s.W + eps * eye)
    if sign_t <= 0 or sign_w <= 0:
        return math.nan
    return float(n * (logdet_t - logdet_w))


@dataclass(frozen=True)
class IndexDef:
    name: str
    rule: str
    fn: Callable[[np.ndarray, Partition, ScatterSummary, np.ndarray], float]


DEFAULT_INDICES: tuple[IndexDef, ...] = (
    IndexDef("calinski_harabasz", MAXIMIZE, lambda X, p, s, D: index_calinski_harabasz(s, p.n, p.k)),
    IndexDef("davies_bouldin", MINIMIZE, lambda X, p, s, D: index_davies_bouldin(X, p)),
    IndexDef("silhouette", MAXIMIZE, lambda X, p, s, D: index_silhouette(X, p, D)),
    IndexDef("dunn", MAXIMIZE, lambda X, p, s, D: index_dunn(X, p, D)),
    IndexDef("friedman", MAX_DIFF, lambda X, p, s, D: index_friedman(s)),
    IndexDef("scott", MAX_DIFF, lambda X, p, s, D: index_scott(s, p.n)),
)
FRIEDMAN = "friedman"


@dataclass(frozen=True)
class IndexTable:
    ks: tuple[int, ...]
    scores: dict[str, tuple[float, ...]]
    rules: dict[str, str]

    def __post_init__(self):
        for name, vals in self.scores.items():
            if len(vals) != len(self.ks):
                raise ValueError(f"index {name!r} lacks a score for every k")
            if name not in self.rules:
                raise ValueError(f"index {name!r} has no decision rule")

    @property
    def names(self) -> list[str]:
        return list(self.scores)

    def restrict(self, k_min: int, k_max: int) -> "IndexTable":
        keep = [i for i, k in enumerate(self.ks) if k_min <= k <= k_max]
        if not keep:
            raise ValueError(f"no candidate k in [{k_min}, {k_max}]")
        return IndexTable(
            tuple(self.ks[i] for i in keep),
            {n: tuple(v[i] for i in keep) for n, v in self.scores.items()},
            dict(self.rules),
        )

    def to_rows(self) -> list[list]:
        rows = [["index", "rule", *[str(k) for k in self.ks]]]
        for name, vals in self.scores.items():
            rows.append([name, self.rules[name], *[marker(v) for v in vals]])
        return rows

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "rules": dict(self.rules),
            "scores": {n: [marker(v) for v in vals] for n, vals in self.scores.items()},
        }


def evaluate_indices(x, p: Partition, dmat: np.ndarray | None = None, indices: Sequence[IndexDef] = DEFAULT_INDICES) -> dict[str, float]:
    X = _as_matrix(x)
    D = distance_matrix(X) if dmat is None else dmat
    s = scatter(X, p)
    return {ix.name: ix.fn(X.values, p, s, D) for ix in indices}


def index_sweep(
    x,
    k_range: tuple[int, int] = (2, 15),
    seed: int = 0,
    engine: str = "kmeans",
    params: EngineParams = EngineParams(),
    indices: Sequence[IndexDef] = DEFAULT_INDICES,
    dmat: np.ndarray | None = None,
) -> IndexTable:
    """Cluster once per candidate k and score every index on that partition.

    The seed for k is derived from ``(seed, k)`` so a k's partition does not
    depend on which other candidates are swept.
    """
    X = _as_matrix(x)
    k_min, k_max = k_range
    if k_min < 1 or k_max < k_min:
        raise ValueError(f"invalid k range {k_range}")
    if k_max >= X.n:
        raise ValueError(f"k_max={k_max} must be below the number of rows ({X.n})")
    D = distance_matrix(X) if dmat is None else dmat
    ks = tuple(range(k_min, k_max + 1))
    cols = {ix.name: [] for ix in indices}
    for k in ks:
        p = run_engine(engine, X, k, [seed, k], params, dmat=D)
        for name, v in evaluate_indices(X, p, D, indices).items():
            cols[name].append(v)
    return IndexTable(ks, {n: tuple(v) for n, v in cols.items()}, {ix.name: ix.rule for ix in indices})


def _key(v: float, rule: str) -> float:
    """Larger is better; nan is worst."""
    if math.isnan(v):
        return -math.inf
    return -v if rule == MINIMIZE else v


def successive_differences(scores: Sequence[float]) -> list[float]:
    """Forward differences ``score(k) - score(k-1)`` (one fewer than scores)."""
    out = []
    for a, b in zip(scores[:-1], scores[1:]):
        d = b - a
        out.append(math.nan if math.isnan(d) else d)
    return out


def difference_keys(scores: Sequence[float], mode: str = "elbow") -> list[float]:
    """Per-candidate merit under a successive-difference rule; nan for the first k.

    ``forward``: the gain ``score(k) - score(k-1)``.
    ``elbow``: that gain minus the next one, ``score(k+1) - score(k)``, with
    no further gain assumed past the last candidate. Rewards the last big
    jump before the curve flattens rather than the biggest single jump.
    """
    gains = successive_differences(scores)
    if mode == "forward":
        keys = gains
    elif mode == "elbow":
        nxt = gains[1:] + [0.0]
        keys = [g - h for g, h in zip(gains, nxt)]
        keys = [math.nan if math.isnan(v) else v for v in keys]
    else:
        raise ValueError(f"unknown difference mode {mode!r}")
    return [math.nan] + keys


def optimal_k(ks: Sequence[int], scores: Sequence[float], rule: str, diff_mode: str = "elbow") -> int:
    if rule in (MAXIMIZE, MINIMIZE):
        if len(ks) < 2:
            raise ValueError(f"{rule} rule needs at least 2 candidate k")
        keys = [_key(v, rule) for v in scores]
        cand = ks
    elif rule == MAX_DIFF:
        if len(ks) < 3:
            raise ValueError("successive-difference rule needs at least 3 candidate k")
        keys = [_key(v, MAXIMIZE) for v in difference_keys(scores, diff_mode)[1:]]
        cand = ks[1:]
    else:
        raise ValueError(f"unknown rule {rule!r}")
    best = 0
    for i in range(1, len(keys)):
        if keys[i] > keys[best]:
            best = i
    return cand[best]


def optimal_k_per_index(t: IndexTable, diff_mode: str = "elbow") -> dict[str, int]:
    return {name: optimal_k(t.ks, vals, t.rules[name], diff_mode) for name, vals in t.scores.items()}
