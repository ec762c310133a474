"""Cluster characterisation: truth tables, survival means, deviation tables,
single-attribute predictors and the robustness sweeps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .consensus import UNASSIGNED
from .datamodel import DataError, Dataset, ImputationPlan, drop_patients_by_missingness, impute
from .engines import distance_matrix, prepare_matrix
from .selection import rank_candidates, aggregate
from .validity import FRIEDMAN, index_sweep

logger = logging.getLogger(__name__)


def _labels(p) -> np.ndarray:
    return np.asarray(getattr(p, "labels", p))


def _fmt_key(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


@dataclass(frozen=True)
class TruthTable:
    rows: tuple[int, ...]
    cols: tuple[str, ...]
    cells: np.ndarray  # percent of patients with both labels
    n_known: int
    n_excluded: int

    def cell(self, row, col) -> float:
        return float(self.cells[self.rows.index(row), self.cols.index(_fmt_key(col))])

    def to_rows(self) -> list[list]:
        out = [["cluster", *self.cols]]
        for r, vals in zip(self.rows, self.cells):
            out.append([r, *[round(float(v), 6) for v in vals]])
        return out

    def to_dict(self) -> dict:
        return {
            "clusters": list(self.rows),
            "categories": list(self.cols),
            "percent": [[float(v) for v in row] for row in self.cells],
            "n_known": self.n_known,
            "n_excluded": self.n_excluded,
        }


def truth_table(p, labels: Sequence[float]) -> TruthTable:
    """Cross-tabulate clusters against an outcome, as percent of the cohort.

    Patients with a missing outcome (NaN) or an UNASSIGNED cluster are left
    out and counted in ``n_excluded``.
    """
    clusters = _labels(p)
    outcome = np.asarray(labels, dtype=np.float64)
    if clusters.shape != outcome.shape:
        raise ValueError("cluster and outcome vectors differ in length")
    known = ~np.isnan(outcome) & (clusters != UNASSIGNED)
    n_known = int(known.sum())
    if n_known == 0:
        raise ValueError("no patient has both a cluster and a known outcome")
    rows = tuple(int(c) for c in np.unique(clusters[known]))
    col_vals = np.unique(outcome[known])
    cells = np.zeros((len(rows), len(col_vals)))
    for i, c in enumerate(rows):
        for j, t in enumerate(col_vals):
            cells[i, j] = 100.0 * np.sum(known & (clusters == c) & (outcome == t)) / n_known
    return TruthTable(rows, tuple(_fmt_key(v) for v in col_vals), cells, n_known, clusters.size - n_known)


@dataclass(frozen=True)
class SurvivalSummary:
    groups: tuple
    counts: tuple[int, ...]
    means: tuple[float, ...]  # nan where a group has no known survival

    def as_dict(self) -> dict:
        return {g: (c, m) for g, c, m in zip(self.groups, self.counts, self.means)}

    def to_rows(self) -> list[list]:
        return [["group", "count", "mean_survival"],
                *[[g, c, "UNDEFINED" if math.isnan(m) else round(m, 6)]
                  for g, c, m in zip(self.groups, self.counts, self.means)]]

    def to_dict(self) -> dict:
        return {
            "groups": [
                {"group": _jsonable(g), "count": c, "mean": None if math.isnan(m) else m}
                for g, c, m in zip(self.groups, self.counts, self.means)
            ]
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def survival_by_group(groups: Sequence, survival: Sequence[float]) -> SurvivalSummary:
    """Mean survival per group, groups in order of first appearance."""
    groups = list(groups)
    surv = np.asarray(survival, dtype=np.float64)
    if len(groups) != surv.size:
        raise ValueError("group and survival vectors differ in length")
    if (surv[~np.isnan(surv)] < 0).any():
        raise ValueError("survival must be non-negative")
    order = list(dict.fromkeys(_jsonable(g) for g in groups))
    counts, means = [], []
    for g in order:
        sel = np.array([_jsonable(x) == g for x in groups]) & ~np.isnan(surv)
        counts.append(int(sel.sum()))
        means.append(float(np.mean(surv[sel])) if sel.any() else math.nan)
    return SurvivalSummary(tuple(order), tuple(counts), tuple(means))


@dataclass(frozen=True)
class DeviationTable:
    attributes: tuple[str, ...]
    clusters: tuple[int, ...]
    percent: np.ndarray  # attribute x cluster; nan where the cohort mean is 0
    cluster_means: np.ndarray
    cohort_means: np.ndarray
    sizes: np.ndarray

    def to_rows(self) -> list[list]:
        out = [["attribute", *[f"cluster_{c}" for c in self.clusters]]]
        for a, row in zip(self.attributes, self.percent):
            out.append([a, *["UNDEFINED" if math.isnan(v) else round(float(v), 6) for v in row]])
        return out

    def to_dict(self) -> dict:
        return {
            "clusters": list(self.clusters),
            "attributes": list(self.attributes),
            "percent": [[None if math.isnan(v) else float(v) for v in row] for row in self.percent],
        }


def attribute_deviation(d: Dataset, p) -> DeviationTable:
    """Percent deviation of each cluster's attribute mean from the cohort mean.

    Only binary and continuous marker/clinical attributes are tabulated.
    UNASSIGNED patients are left out of both the cluster and cohort means.
    """
    labels = _labels(p)
    if labels.size != d.n_patients:
        raise ValueError("partition and dataset differ in n")
    cols = [j for j, s in enumerate(d.specs) if s.clusterable and s.kind != "categorical"]
    keep = labels != UNASSIGNED
    X = d.values[keep][:, cols]
    if d.missing[keep][:, cols].any():
        raise DataError("attribute_deviation needs an imputed dataset")
    lab = labels[keep]
    clusters = tuple(int(c) for c in np.unique(lab))
    cohort = X.mean(axis=0)
    cm = np.array([X[lab == c].mean(axis=0) for c in clusters]).T
    sizes = np.array([np.sum(lab == c) for c in clusters])
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(cohort[:, None] != 0, 100.0 * (cm - cohort[:, None]) / cohort[:, None], np.nan)
    return DeviationTable(tuple(d.specs[j].name for j in cols), clusters, pct, cm, cohort, sizes)


def single_attribute_predictor(attr: Sequence[float], labels: Sequence[float]) -> float:
    """Best accuracy of a one-threshold rule predicting a two-valued outcome.

    Thresholds sit at midpoints of the sorted distinct attribute values and
    both polarities are tried; for a 0/1 attribute this is the better of the
    two value-to-label mappings. NaN marks a missing value in either input.
    """
    a = np.asarray(attr, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if a.shape != y.shape:
        raise ValueError("attribute and label vectors differ in length")
    ok = ~np.isnan(a) & ~np.isnan(y)
    if not ok.any():
        raise ValueError("no patient has both values known")
    a, y = a[ok], y[ok]
    classes = np.unique(y)
    if classes.size > 2:
        raise ValueError("outcome must take at most two values")
    pos = y == classes[-1]
    vals = np.unique(a)
    if vals.size < 2:
        frac = pos.mean()
        return float(max(frac, 1 - frac))
    thresholds = (vals[:-1] + vals[1:]) / 2
    above = a[None, :] > thresholds[:, None]
    acc = (above == pos[None, :]).mean(axis=1)
    return float(np.maximum(acc, 1 - acc).max())


# -- sweeps ---------------------------------------------------------------


@dataclass
class SweepCurve:
    mode: str
    sizes: list[int] = field(default_factory=list)
    chosen_k: list[int] = field(default_factory=list)
    chosen_k_no_friedman: list[int] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_rows(self) -> list[list]:
        size_name = "n_patients" if self.mode == "patients" else "n_attributes"
        return [[size_name, "chosen_k"], *[[s, k] for s, k in zip(self.sizes, self.chosen_k)]]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "points": [
                {"size": s, "chosen_k": k, "chosen_k_no_friedman": k2}
                for s, k, k2 in zip(self.sizes, self.chosen_k, self.chosen_k_no_friedman)
            ],
            "dropped": list(self.dropped),
            "metadata": dict(self.metadata),
            "warnings": list(self.warnings),
        }


def _choose(x, cfg: RunConfig, seed: int) -> tuple[int, int]:
    k_max = min(cfg.agg_max, x.n - 1)
    if k_max < cfg.agg_min:
        raise DataError(f"too few patients ({x.n}) for the aggregation range")
    table = index_sweep(x, (cfg.agg_min, k_max), seed=seed, params=cfg.engine_params,
                        dmat=distance_matrix(x))
    ranks = rank_candidates(table, cfg.diff_mode)
    return (aggregate(ranks, table.ks).chosen_k,
            aggregate(ranks, table.ks, exclude=(FRIEDMAN,)).chosen_k)


def _plan(d: Dataset, cfg: RunConfig) -> ImputationPlan:
    return ImputationPlan.parse(cfg.imputation, d.specs)


def sweep_patients(d: Dataset, step: int, cfg: RunConfig, floor: int | None = None) -> SweepCurve:
    """Drop the ``step`` most-missing patients at a time, re-impute, re-select k.

    ``d`` is the unimputed cohort. Stops before the size falls below
    ``floor`` (``cfg.sweep_floor`` by default).
    """
    floor = cfg.sweep_floor if floor is None else floor
    if step < 1:
        raise ValueError("step must be >= 1")
    if d.n_patients < floor:
        raise DataError(f"cohort of {d.n_patients} patients is already below the floor of {floor}")
    curve = SweepCurve("patients", metadata={"step": step, "floor": floor, "tnm_stages": list(cfg.tnm_stages)})
    plan = _plan(d, cfg)
    size = d.n_patients
    while size >= floor:
        sub = impute(drop_patients_by_missingness(d, size), plan)
        k_all, k_nof = _choose(prepare_matrix(sub), cfg, cfg.seed)
        curve.sizes.append(size)
        curve.chosen_k.append(k_all)
        curve.chosen_k_no_friedman.append(k_nof)
        size -= step
    if size > 0:
        msg = f"sweep stopped at floor {floor}: next size {size} is below it"
        curve.warnings.append(msg)
        logger.warning(msg)
    return curve


def attribute_drop_order(d: Dataset) -> list[int]:
    """Clusterable columns, most-missing first; ties drop the later column first."""
    frac = d.missing.mean(axis=0) if d.n_patients else np.zeros(d.n_attributes)
    cols = [j for j, s in enumerate(d.specs) if s.clusterable]
    return sorted(cols, key=lambda j: (-frac[j], -j))


def sweep_attributes(d: Dataset, cfg: RunConfig, min_attributes: int | None = None) -> SweepCurve:
    """Drop attributes one at a time (most missing first) and re-select k.

    The drop order is fixed from the missingness of ``d`` as given; the
    imputed values are computed once since imputation is per attribute.
    """
    min_attributes = cfg.min_attributes if min_attributes is None else min_attributes
    order = attribute_drop_order(d)
    if len(order) < 2:
        raise DataError("attribute sweep needs at least 2 marker/clinical attributes")
    min_attributes = max(1, min(min_attributes, len(order)))
    full = impute(d, _plan(d, cfg))
    outcome_cols = [j for j, s in enumerate(d.specs) if not s.clusterable]
    curve = SweepCurve("attributes", metadata={"min_attributes": min_attributes,
                                                "tnm_stages": list(cfg.tnm_stages)})
    removed: list[int] = []
    while True:
        keep = [j for j in range(d.n_attributes) if j not in removed and j not in outcome_cols]
        sub = full.take_columns(sorted(keep + outcome_cols))
        k_all, k_nof = _choose(prepare_matrix(sub), cfg, cfg.seed)
        curve.sizes.append(len(keep))
        curve.chosen_k.append(k_all)
        curve.chosen_k_no_friedman.append(k_nof)
        if len(keep) <= min_attributes:
            break
        nxt = order[len(removed)]
        removed.append(nxt)
        curve.dropped.append(d.specs[nxt].name)
    return curve
