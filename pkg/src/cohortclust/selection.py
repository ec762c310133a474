"""Rank aggregation of validity indices into a single optimal-k curve."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engines import EngineParams
from .validity import MAXIMIZE, FRIEDMAN, MAX_DIFF, IndexTable, _key, difference_keys, index_sweep


@dataclass(frozen=True)
class KSelection:
    ks: tuple[int, ...]
    mean_ranks: tuple[float, ...]
    scores: tuple[float, ...]
    chosen_k: int
    excluded: tuple[str, ...] = ()
    included: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "mean_ranks": list(self.mean_ranks),
            "scores": list(self.scores),
            "chosen_k": self.chosen_k,
            "included": list(self.included),
            "excluded": list(self.excluded),
        }

    def to_rows(self) -> list[list]:
        return [["k", "score"], *[[k, s] for k, s in zip(self.ks, self.scores)]]


def average_ranks(keys: Sequence[float]) -> list[float]:
    """Rank 1 = largest key; tied keys share the mean of their positions."""
    order = sorted(range(len(keys)), key=lambda i: -keys[i])
    ranks = [0.0] * len(keys)
    pos = 0
    while pos < len(order):
        end = pos
        while end + 1 < len(order) and keys[order[end + 1]] == keys[order[pos]]:
            end += 1
        r = (pos + end) / 2 + 1
        for q in range(pos, end + 1):
            ranks[order[q]] = r
        pos = end + 1
    return ranks


def rank_vector(scores: Sequence[float], rule: str, diff_mode: str = "elbow") -> list[float]:
    """Ranks of the candidates under one index's rule.

    Difference-rule indices rank by their difference keys (see
    :func:`~cohortclust.validity.difference_keys`); the first candidate has
    no difference and is ranked last.
    """
    m = len(scores)
    if rule == MAX_DIFF:
        if m == 1:
            return [1.0]
        keys = [_key(v, MAXIMIZE) for v in difference_keys(scores, diff_mode)[1:]]
        return [float(m)] + average_ranks(keys)
    return average_ranks([_key(v, rule) for v in scores])


def rank_candidates(t: IndexTable, diff_mode: str = "elbow") -> dict[str, list[float]]:
    if not t.scores or not t.ks:
        raise ValueError("empty index table")
    return {name: rank_vector(vals, t.rules[name], diff_mode) for name, vals in t.scores.items()}


def aggregate(ranks: Mapping[str, Sequence[float]], ks: Sequence[int], exclude: Sequence[str] = ()) -> KSelection:
    """Mean rank per k over the included indices; score = 1 / mean rank."""
    names = sorted(n for n in ranks if n not in set(exclude))
    if not names:
        raise ValueError("every index was excluded")
    mat = np.array([ranks[n] for n in names], dtype=np.float64)
    if mat.shape[1] != len(ks):
        raise ValueError("rank vectors do not match the candidate range")
    # sum in sorted-name order so the result ignores the input order
    mean = mat.sum(axis=0) / len(names)
    scores = [1.0 / r for r in mean]
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return KSelection(
        tuple(int(k) for k in ks),
        tuple(float(r) for r in mean),
        tuple(float(s) for s in scores),
        int(ks[best]),
        tuple(sorted(set(exclude) & set(ranks))),
        tuple(names),
    )


def select_from_table(t: IndexTable) -> tuple[KSelection, KSelection]:
    ranks = rank_candidates(t)
    return aggregate(ranks, t.ks), aggregate(ranks, t.ks, exclude=(FRIEDMAN,))


def select_k(
    x,
    k_range: tuple[int, int] = (2, 10),
    seed: int = 0,
    params: EngineParams = EngineParams(),
    table: IndexTable | None = None,
    dmat=None,
) -> tuple[KSelection, KSelection]:
    """(with Friedman, without Friedman) selections over ``k_range``.

    A precomputed ``table`` covering a wider sweep is restricted to the
    range instead of re-clustering.
    """
    if table is None:
        table = index_sweep(x, k_range, seed=seed, params=params, dmat=dmat)
    else:
        table = table.restrict(*k_range)
    return select_from_table(table)
