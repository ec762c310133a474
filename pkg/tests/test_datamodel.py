import numpy as np
import pytest

from cohortclust.datamodel import (
    AttributeSpec,
    DataError,
    Dataset,
    ImputationPlan,
    drop_patients_by_missingness,
    dump_dataset,
    filter_attributes,
    impute,
    load_dataset,
    missingness_profile,
    read_schema,
    subset_by_tnm,
    write_schema,
)

NAN = np.nan


def make(cols, kinds=None, roles=None):
    """Dataset from column lists; None marks a missing cell."""
    names = [f"a{j}" for j in range(len(cols))]
    kinds = kinds or ["continuous"] * len(cols)
    roles = roles or ["marker"] * len(cols)
    vals = np.array([[NAN if v is None else v for v in c] for c in cols], dtype=float).T
    specs = tuple(AttributeSpec(n, k, r) for n, k, r in zip(names, kinds, roles))
    return Dataset(specs, vals, np.isnan(vals), tuple(str(i + 1) for i in range(vals.shape[0])))


BIN2 = [AttributeSpec("a", "binary"), AttributeSpec("b", "binary")]


def test_load_direct_parse():
    d = load_dataset("a,b\n1,0\n0,1\n", BIN2)
    assert d.values.tolist() == [[1, 0], [0, 1]]
    assert d.patient_ids == ("1", "2")
    assert not d.missing.any()


def test_load_one_empty_cell():
    d = load_dataset("a,b\n1,\n0,1\n", BIN2)
    assert d.missing.sum() == 1 and d.missing[0, 1]


def test_load_binary_violation_reports_line():
    with pytest.raises(DataError) as err:
        load_dataset("a,b\n1,0\n2,1\n", BIN2)
    assert err.value.line == 3


def test_load_header_mismatch():
    with pytest.raises(DataError):
        load_dataset("a,c\n1,0\n", BIN2)


def test_identifier_column_becomes_ids():
    schema = read_schema("pid categorical identifier\nx continuous\n# comment\n")
    d = load_dataset("pid,x\nP1,1.5\nP2,NA\n", schema)
    assert d.patient_ids == ("P1", "P2")
    assert d.names == ["x"]
    assert d.missing[1, 0]


def test_schema_round_trip():
    specs = [AttributeSpec("x", "binary"), AttributeSpec("s", "continuous", "outcome")]
    assert read_schema(write_schema(specs)) == specs


def test_dump_load_round_trip():
    d = make([[1.0, None, 3.5], [0.0, 1.0, 1.0]], kinds=["continuous", "binary"])
    back = load_dataset(dump_dataset(d, id_name=None), list(d.specs))
    assert back.equals(d)


def test_profile_examples():
    assert missingness_profile(make([[1, 0], [0, 1]])).overall_fraction == 0.0
    r = missingness_profile(make([[1, None], [0, 1]]))
    assert r.overall_fraction == 0.25
    assert r.per_attribute["a0"] == 0.5 and r.per_patient["2"] == 0.5
    # 4x3 with 2 missing; direct count 2 / 12
    r = missingness_profile(make([[1, 2, None, 4], [1, 1, 1, 1], [None, 0, 0, 0]]))
    assert r.overall_fraction == pytest.approx(2 / 12)


def test_impute_examples():
    d = make([[1, 1, 0, None]], kinds=["binary"])
    assert impute(d, ImputationPlan({"a0": "mode"})).column("a0").tolist() == [1, 1, 0, 1]
    d = make([[1.0, 3.0, None]])
    assert impute(d, ImputationPlan({"a0": "mean"})).column("a0").tolist() == [1.0, 3.0, 2.0]
    d = make([[0, 1, None]], kinds=["binary"])
    assert impute(d, ImputationPlan({"a0": "mode"})).column("a0").tolist() == [0, 1, 0]


def test_impute_errors():
    with pytest.raises(DataError):
        impute(make([[None, None]]), ImputationPlan({"a0": "mean"}))
    with pytest.raises(DataError):
        impute(make([[0, None]], kinds=["binary"]), ImputationPlan({"a0": "mean"}))


def test_default_plan_skips_outcomes():
    d = make([[1.0, None], [None, 2.0]], roles=["marker", "outcome"])
    out = impute(d, ImputationPlan.default(d.specs))
    assert not out.missing[:, 0].any() and out.missing[0, 1]


def test_plan_parse():
    specs = [AttributeSpec("x", "continuous"), AttributeSpec("b", "binary")]
    assert ImputationPlan.parse("mean", specs).strategies == {"x": "mean", "b": "mode"}
    assert ImputationPlan.parse("auto,x:mode", specs).strategies == {"x": "mode", "b": "mode"}


def test_filter_examples():
    d = make([[1, 2, 3, 4], [1, 2, 3, 4]])
    assert filter_attributes(d, corr_threshold=0.99).names == ["a0"]
    d = make([[1, None, None, 4], [1, 2, 3, 5]])
    assert filter_attributes(d, max_missing=0.4).names == ["a1"]
    # r(x, 1-x) = -1 exactly
    d = make([[0.0, 0.2, 0.7, 1.0], [1.0, 0.8, 0.3, 0.0]])
    assert filter_attributes(d, corr_threshold=0.99).names == ["a0"]


def test_filter_keeps_less_missing_member():
    d = make([[1, 2, None, 4, 5], [1, 2, 3, 4, 5]])
    assert filter_attributes(d, corr_threshold=0.99).names == ["a1"]


def test_filter_drop_list_and_roles():
    d = make([[1, 2], [3, 1], [5, 6]], roles=["marker", "marker", "outcome"])
    assert filter_attributes(d, drop_list=["a0"]).names == ["a1", "a2"]
    with pytest.raises(DataError):
        filter_attributes(d, drop_list=["zz"])
    with pytest.raises(DataError):
        filter_attributes(d, drop_list=["a2"])


def test_drop_patients():
    d = make([[1, None, None], [1, 1, None]])
    assert drop_patients_by_missingness(d, 3).equals(d)
    assert drop_patients_by_missingness(d, 2).patient_ids == ("1", "2")
    d = make([[None, 1, None], [1, None, None], [1, 1, None]])
    # rows 1 and 2 tied at 1 missing, earlier kept
    assert drop_patients_by_missingness(d, 1).patient_ids == ("1",)


def test_subset_by_tnm():
    d = make([[0.1, 0.2, 0.3, 0.4], [1, 2, 3, 4]], kinds=["continuous", "categorical"],
             roles=["marker", "outcome"])
    d = Dataset((d.specs[0], AttributeSpec("tnm", "categorical", "outcome")), d.values, d.missing, d.patient_ids)
    assert subset_by_tnm(d, {1, 2, 3, 4}).equals(d)
    assert subset_by_tnm(d, {2, 3}).patient_ids == ("2", "3")
    assert subset_by_tnm(d, {4}).n_patients == 1
    empty = subset_by_tnm(d.take_rows([0, 1]), {4})
    assert empty.n_patients == 0
    assert missingness_profile(empty).overall_fraction == 0.0


def test_dataset_is_read_only():
    d = make([[1.0, 2.0]])
    with pytest.raises(ValueError):
        d.values[0, 0] = 5.0
