"""Cross-engine agreement: label alignment, consensus classes and ARI."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .engines import Partition

UNASSIGNED = -1


def contingency(a: np.ndarray, b: np.ndarray, ka: int | None = None, kb: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    ka = int(a.max()) + 1 if ka is None else ka
    kb = int(b.max()) + 1 if kb is None else kb
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def _best_total(weights: np.ndarray) -> int:
    if weights.size == 0:
        return 0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return int(weights[rows, cols].sum())


def best_mapping(overlap: np.ndarray) -> np.ndarray:
    """Lexicographically smallest permutation maximising total overlap.

    ``overlap[o, r]`` counts points with label ``o`` in the partition being
    relabelled and ``r`` in the reference; ``result[o]`` is the new label.
    Integer weights make the optimum comparisons exact.
    """
    k = overlap.shape[0]
    target = _best_total(overlap)
    mapping = np.empty(k, dtype=np.int64)
    free = list(range(k))
    gained = 0
    for o in range(k):
        for r in free:
            rest_rows = list(range(o + 1, k))
            rest_cols = [c for c in free if c != r]
            sub = overlap[np.ix_(rest_rows, rest_cols)]
            if gained + overlap[o, r] + _best_total(sub) == target:
                mapping[o] = r
                gained += int(overlap[o, r])
                free.remove(r)
                break
    return mapping


def align_labels(reference: Partition, other: Partition) -> Partition:
    if reference.n != other.n:
        raise ValueError("partitions differ in n")
    if reference.k != other.k:
        raise ValueError("partitions differ in k")
    table = contingency(other.labels, reference.labels, other.k, reference.k)
    mapping = best_mapping(table)
    return Partition(mapping[other.labels], other.k, other.objective, other.trace)


def adjusted_rand_index(p, q) -> float:
    """Chance-corrected pair-counting agreement.

    Accepts partitions or label arrays. Two trivial partitions that agree
    completely (both all-in-one or both all-singletons) score 1.
    """
    a = np.asarray(getattr(p, "labels", p))
    b = np.asarray(getattr(q, "labels", q))
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    n = a.size
    _, a = np.unique(a, return_inverse=True)
    _, b = np.unique(b, return_inverse=True)
    table = contingency(a, b).astype(np.float64)
    comb = lambda v: v * (v - 1) / 2
    sum_ij = comb(table).sum()
    sum_a = comb(table.sum(axis=1)).sum()
    sum_b = comb(table.sum(axis=0)).sum()
    total = comb(float(n))
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


@dataclass(frozen=True, eq=False)
class ConsensusResult:
    reference: str
    engines: tuple[str, ...]
    aligned: dict[str, Partition]
    agreement: np.ndarray
    labels: np.ndarray
    threshold: int
    coassignment: np.ndarray

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def unassigned(self) -> np.ndarray:
        return self.labels == UNASSIGNED

    @property
    def unassigned_fraction(self) -> float:
        return float(self.unassigned.mean())

    def to_dict(self, patient_ids: Sequence[str] | None = None) -> dict:
        ids = list(patient_ids) if patient_ids is not None else [str(i) for i in range(self.n)]
        return {
            "reference": self.reference,
            "engines": list(self.engines),
            "threshold": self.threshold,
            "unassigned_label": UNASSIGNED,
            "unassigned_count": int(self.unassigned.sum()),
            "unassigned_fraction": self.unassigned_fraction,
            "patients": [
                {
                    "patient_id": pid,
                    "label": int(self.labels[i]),
                    "agreement": int(self.agreement[i]),
                    "aligned": {e: int(self.aligned[e].labels[i]) for e in self.engines},
                }
                for i, pid in enumerate(ids)
            ],
        }


def coassignment_matrix(partitions: Sequence[Partition]) -> np.ndarray:
    n = partitions[0].n
    acc = np.zeros((n, n))
    for p in partitions:
        acc += p.labels[:, None] == p.labels[None, :]
    return acc / len(partitions)


def build_consensus(
    partitions: Mapping[str, Partition],
    reference: str = "kmeans",
    threshold: int | None = None,
) -> ConsensusResult:
    """Align every partition to ``reference`` and vote per patient.

    A patient's agreement is the number of engines giving its most common
    aligned label (a tie prefers the reference's label, then the smaller
    label). Patients below ``threshold`` agreement are UNASSIGNED. The
    threshold defaults to one less than the number of engines.
    """
    if len(partitions) < 2:
        raise ValueError("consensus needs at least two partitions")
    if reference not in partitions:
        raise ValueError(f"reference engine {reference!r} not among partitions")
    ref = partitions[reference]
    for name, p in partitions.items():
        if p.n != ref.n or p.k != ref.k:
            raise ValueError(f"partition {name!r} differs from the reference in n or k")
    n_eng = len(partitions)
    if threshold is None:
        threshold = n_eng - 1
    if not 1 <= threshold <= n_eng:
        raise ValueError(f"agreement threshold must lie in [1, {n_eng}], got {threshold}")

    engines = (reference, *sorted(n for n in partitions if n != reference))
    aligned = {name: align_labels(ref, partitions[name]) for name in engines}
    votes = np.zeros((ref.n, ref.k), dtype=np.int64)
    for p in aligned.values():
        votes[np.arange(ref.n), p.labels] += 1
    top = votes.max(axis=1)
    winner = np.argmax(votes, axis=1)
    ref_wins = votes[np.arange(ref.n), ref.labels] == top
    winner = np.where(ref_wins, ref.labels, winner)
    labels = np.where(top >= threshold, winner, UNASSIGNED)
    co = coassignment_matrix([partitions[e] for e in engines])
    return ConsensusResult(reference, engines, aligned, top, labels, threshold, co)
