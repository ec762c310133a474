"""Synthetic cohorts with a planted cluster structure.

Binary markers are noisy copies of per-cluster prototypes, continuous
covariates are Gaussian around per-cluster means, survival is drawn
around per-cluster means and the TNM stage is drawn independently of the
cluster.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .datamodel import AttributeSpec, DataError, Dataset
from .engines import Partition


@dataclass(frozen=True)
class SyntheticSpec:
    n_patients: int = 300
    n_binary: int = 40
    n_continuous: int = 0
    k_true: int = 3
    flip_prob: float = 0.05
    separation: float = 0.5
    missing_rate: float = 0.0
    survival_effect: tuple[float, ...] = ()
    survival_baseline: float = 0.0
    survival_sd: float = 6.0
    continuous_sd: float = 1.0
    tnm_stages: tuple[int, ...] = (1, 2, 3, 4)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "survival_effect", tuple(float(v) for v in self.survival_effect))
        object.__setattr__(self, "tnm_stages", tuple(int(v) for v in self.tnm_stages))
        if self.n_patients < 1 or self.k_true < 1:
            raise DataError("n_patients and k_true must be positive")
        if self.k_true > self.n_patients:
            raise DataError("k_true exceeds n_patients")
        if self.n_binary < 0 or self.n_continuous < 0 or self.n_binary + self.n_continuous < 1:
            raise DataError("need at least one binary or continuous attribute")
        if not 0 <= self.flip_prob < 0.5:
            raise DataError("flip_prob must lie in [0, 0.5)")
        if not 0 <= self.missing_rate < 0.9:
            raise DataError("missing_rate must lie in [0, 0.9)")
        if not 0 <= self.separation <= 1:
            raise DataError("separation is a fraction of n_binary in [0, 1]")
        if self.survival_effect and len(self.survival_effect) != self.k_true:
            raise DataError("survival_effect needs one entry per planted cluster")
        if not self.tnm_stages or any(s not in (1, 2, 3, 4) for s in self.tnm_stages):
            raise DataError("tnm_stages must be a non-empty subset of {1,2,3,4}")

    @property
    def survival_means(self) -> tuple[float, ...]:
        effect = self.survival_effect or (42.0,) * self.k_true
        return tuple(self.survival_baseline + e for e in effect)

    @classmethod
    def from_mapping(cls, data: dict) -> "SyntheticSpec":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            if key not in known:
                raise DataError(f"unknown synth spec key {key!r}")
            default = known[key].default
            if isinstance(default, tuple) or key in ("survival_effect", "tnm_stages"):
                parts = [p for p in str(raw).replace(";", ",").split(",") if p.strip()]
                kwargs[key] = tuple(float(p) for p in parts)
            elif isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["survival_effect"] = list(self.survival_effect)
        out["tnm_stages"] = list(self.tnm_stages)
        return out


def min_hamming(protos: np.ndarray) -> int:
    k = len(protos)
    if k < 2:
        return protos.shape[1]
    return int(min((protos[i] != protos[j]).sum() for i in range(k) for j in range(i + 1, k)))


def _prototypes(rng: np.random.Generator, k: int, n_bits: int, min_dist: int, tries: int = 200) -> np.ndarray:
    if k == 1 or min_dist == 0:
        return rng.integers(0, 2, size=(k, n_bits))
    # Plotkin bound: a binary code with 2*d > n has at most 2d / (2d - n) words
    if min_dist > n_bits or (2 * min_dist > n_bits and k > (2 * min_dist) // (2 * min_dist - n_bits)):
        raise DataError(
            f"cannot place {k} prototypes {min_dist} bits apart in {n_bits} binary attributes"
        )
    for _ in range(tries):
        protos = rng.integers(0, 2, size=(k, n_bits))
        # local repair: flip bits of the closest pair towards disagreement
        for _ in range(4 * n_bits):
            worst, pair = n_bits + 1, None
            for i in range(k):
                for j in range(i + 1, k):
                    h = int((protos[i] != protos[j]).sum())
                    if h < worst:
                        worst, pair = h, (i, j)
            if worst >= min_dist:
                return protos
            i, j = pair
            same = np.flatnonzero(protos[i] == protos[j])
            b = same[rng.integers(len(same))]
            protos[j, b] ^= 1
    raise DataError(
        f"could not place {k} prototypes {min_dist} bits apart in {n_bits} binary attributes"
    )


def generate(spec: SyntheticSpec) -> tuple[Dataset, Partition]:
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_patients, spec.k_true
    truth = np.arange(n) % k

    min_dist = math.ceil(spec.separation * spec.n_binary - 1e-9)
    protos = _prototypes(rng, k, spec.n_binary, min_dist)
    binary = protos[truth].astype(np.float64)
    flips = rng.random(binary.shape) < spec.flip_prob
    binary[flips] = 1.0 - binary[flips]

    # continuous covariates: cluster means spaced by separation-scaled offsets
    cmeans = rng.normal(0.0, 4.0 * max(spec.separation, 0.05), size=(k, spec.n_continuous)) + 50.0
    cont = cmeans[truth] + rng.normal(0.0, spec.continuous_sd, size=(n, spec.n_continuous))

    markers = np.hstack([binary, cont])
    missing = np.zeros(markers.shape, dtype=bool)
    if spec.missing_rate > 0:
        missing = rng.random(markers.shape) < spec.missing_rate

    smeans = np.asarray(spec.survival_means)
    survival = np.maximum(0.0, smeans[truth] + rng.normal(0.0, spec.survival_sd, size=n))
    survival = np.round(survival, 2)
    stages = np.asarray(spec.tnm_stages, dtype=np.float64)
    tnm = stages[rng.permutation(np.arange(n) % len(stages))]

    specs = [AttributeSpec(f"b{j + 1}", "binary", "marker") for j in range(spec.n_binary)]
    specs += [AttributeSpec(f"c{j + 1}", "continuous", "clinical") for j in range(spec.n_continuous)]
    specs += [AttributeSpec("tnm", "categorical", "outcome"), AttributeSpec("survival", "continuous", "outcome")]
    values = np.column_stack([markers, tnm, survival])
    mask = np.hstack([missing, np.zeros((n, 2), dtype=bool)])
    width = len(str(n))
    ids = tuple(f"P{i + 1:0{width}d}" for i in range(n))
    return Dataset(tuple(specs), values, mask, ids), Partition(truth, k)
