import math

import numpy as np
import pytest

from cohortclust.config import RunConfig
from cohortclust.consensus import UNASSIGNED
from cohortclust.datamodel import AttributeSpec, Dataset, DataError
from cohortclust.reporting import (
    attribute_deviation,
    attribute_drop_order,
    single_attribute_predictor,
    survival_by_group,
    sweep_attributes,
    sweep_patients,
    truth_table,
)
from cohortclust.synth import SyntheticSpec, generate


def test_truth_table_examples():
    t = truth_table(np.array([0, 0, 1, 1]), [2, 3, 2, 3])
    assert np.allclose(t.cells, 25.0)
    t = truth_table(np.array([0, 1, 1, 0]), [0, 1, 1, 0])
    assert t.cells.tolist() == [[50.0, 0.0], [0.0, 50.0]]


def test_truth_table_exclusions():
    t = truth_table(np.array([0, UNASSIGNED, 1, 1]), [2, 3, math.nan, 3])
    assert t.n_known == 2 and t.n_excluded == 2
    assert t.cells.sum() == pytest.approx(100.0)
    assert t.cell(0, 2) == 50.0


def test_survival_examples():
    s = survival_by_group(["A", "A", "B"], [10, 20, 30])
    assert s.as_dict() == {"A": (2, 15.0), "B": (1, 30.0)}
    s = survival_by_group([1, 1, 1], [3, 4, 8])
    assert s.means == (5.0,)
    s = survival_by_group([0, 1], [5.0, math.nan])
    assert s.counts == (1, 0) and math.isnan(s.means[1])
    with pytest.raises(ValueError):
        survival_by_group([0], [-1.0])


def _ds(cols, kinds=None):
    kinds = kinds or ["binary"] * len(cols)
    specs = tuple(AttributeSpec(f"a{j}", k) for j, k in enumerate(kinds))
    v = np.array(cols, dtype=float).T
    return Dataset(specs, v, np.isnan(v), tuple(str(i) for i in range(v.shape[0])))


def test_deviation_examples():
    p = np.array([0, 0, 1, 1])
    assert attribute_deviation(_ds([[1, 0, 1, 0]]), p).percent.tolist() == [[0.0, 0.0]]
    assert attribute_deviation(_ds([[1, 1, 0, 0]]), p).percent.tolist() == [[100.0, -100.0]]
    assert math.isnan(attribute_deviation(_ds([[0, 0, 0, 0]]), p).percent[0, 0])


def test_deviation_skips_unassigned():
    t = attribute_deviation(_ds([[1, 1, 0, 0]]), np.array([0, UNASSIGNED, 1, 1]))
    assert t.cohort_means[0] == pytest.approx(1 / 3)
    assert t.clusters == (0, 1)


def test_single_attribute_predictor():
    assert single_attribute_predictor([0, 0, 1, 1], [2, 2, 3, 3]) == 1.0
    assert single_attribute_predictor([0, 1, 0, 1], [2, 2, 3, 3]) == 0.5
    assert single_attribute_predictor([1, 2, 3, 4], [2, 2, 3, 3]) == 1.0
    assert single_attribute_predictor([4, 3, 2, 1], [2, 2, 3, 3]) == 1.0
    assert single_attribute_predictor([1, 1, 1, 1], [2, 2, 2, 3]) == 0.75


def test_single_attribute_predictor_scan_oracle():
    rng = np.random.default_rng(2)
    a, y = rng.normal(size=30), rng.integers(0, 2, 30)
    best = 0.0
    for t in np.unique(a):
        pred = a >= t
        acc = (pred == y).mean()
        best = max(best, acc, 1 - acc)
    assert single_attribute_predictor(a, y) == pytest.approx(best)


def _cohort(**kw):
    spec = dict(n_patients=120, n_binary=30, k_true=3, flip_prob=0.05, missing_rate=0.05, seed=3)
    spec.update(kw)
    return generate(SyntheticSpec(**spec))[0]


CFG = RunConfig(agg_min=2, agg_max=6, restarts=8)


def test_sweep_patients_constant_k():
    curve = sweep_patients(_cohort(), 30, CFG, floor=60)
    assert curve.sizes == [120, 90, 60]
    assert set(curve.chosen_k) == {3}
    assert curve.warnings


def test_sweep_patients_large_step_and_floor():
    d = _cohort()
    assert sweep_patients(d, 500, CFG, floor=30).sizes == [120]
    with pytest.raises(DataError):
        sweep_patients(d, 10, CFG, floor=200)


def test_sweep_attributes():
    d = _cohort(n_binary=12)
    curve = sweep_attributes(d, CFG, min_attributes=9)
    assert curve.sizes == [12, 11, 10, 9]
    assert curve.sizes == sorted(curve.sizes, reverse=True)
    assert set(curve.chosen_k) == {3}


def test_attribute_drop_order_ties_reverse():
    d = _ds([[0, 1, 0], [1, 0, 1], [1, 1, 0]])
    assert attribute_drop_order(d) == [2, 1, 0]
    d = _ds([[0, 1, math.nan], [1, 0, 1], [1, 1, 0]])
    assert attribute_drop_order(d) == [0, 2, 1]
