import itertools

import numpy as np
import pytest

from cohortclust.datamodel import AttributeSpec, Dataset
from cohortclust.engines import (
    FuzzyMembership,
    Matrix,
    Partition,
    distance_matrix,
    fuzzy_cmeans,
    harden,
    hierarchical,
    kmeans,
    pam,
    prepare_matrix,
    run_all,
)

import oracles


def brute_kmeans(points, k):
    pts = points.tolist()
    return min(oracles.sse(pts, lab, k) for lab in oracles.set_partitions(len(pts), k))


def brute_pam(D, k):
    n = len(D)
    return min(sum(min(D[i][m] for m in med) for i in range(n)) for med in itertools.combinations(range(n), k))


def groups_of(p):
    return sorted(sorted(np.flatnonzero(p.labels == c).tolist()) for c in range(p.k))


def test_kmeans_four_points(four_points, backend):
    p = kmeans(four_points, 2, seed=3)
    assert groups_of(p) == [[0, 1], [2, 3]]
    assert p.objective == pytest.approx(brute_kmeans(four_points, 2)) == pytest.approx(1.0)


def test_kmeans_edge_k(four_points, backend):
    assert kmeans(four_points, 4).objective == 0.0
    p = kmeans(four_points, 1)
    assert p.objective == pytest.approx(((four_points - four_points.mean(0)) ** 2).sum())


def test_kmeans_trace_non_increasing(backend):
    x = np.random.default_rng(1).normal(size=(60, 3))
    p = kmeans(x, 4, seed=2, restarts=5)
    assert all(b <= a + 1e-12 for a, b in zip(p.trace, p.trace[1:]))
    assert p.trace[-1] == p.objective


def test_kmeans_determinism():
    x = np.random.default_rng(0).normal(size=(40, 2))
    a, b = kmeans(x, 3, seed=7), kmeans(x, 3, seed=7)
    assert np.array_equal(a.labels, b.labels) and a.objective == b.objective


def test_pam_four_points(four_points, backend):
    p = pam(four_points, 2)
    assert groups_of(p) == groups_of(kmeans(four_points, 2))
    D = distance_matrix(four_points)
    assert p.objective == pytest.approx(brute_pam(D.tolist(), 2))


def test_pam_edges(four_points, backend):
    assert pam(four_points, 4).objective == 0.0
    assert pam(np.ones((5, 2)), 1).objective == 0.0
    # duplicates with k=2 still give two non-empty clusters
    assert pam(np.ones((5, 2)), 2).sizes().min() >= 1


def test_pam_matches_exhaustive_medoids(backend):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(size=(8, 2))
        D = distance_matrix(x)
        for k in (2, 3):
            assert pam(x, k).objective <= brute_pam(D.tolist(), k) * 1.05 + 1e-12


def test_hierarchical_examples(four_points, backend):
    assert groups_of(hierarchical(four_points, 2, "average")) == [[0, 1], [2, 3]]
    assert hierarchical(four_points, 4).k == 4
    p = hierarchical(np.array([[0.0], [1.0], [10.0]]), 2, "single")
    assert groups_of(p) == [[0, 1], [2]]
    assert p.objective == 1.0


def test_hierarchical_linkage_heights(backend):
    # 0, 1, 3, 10: complete merges {0,1} (1), then {0,1,3} (3), then all (10)
    x = np.array([[0.0], [1.0], [3.0], [10.0]])
    assert hierarchical(x, 1, "complete").objective == 10.0
    assert hierarchical(x, 1, "single").objective == 7.0
    # average: {0,1}@1, {0,1}+{3}@2.5, then mean(10,9,7)=26/3
    assert hierarchical(x, 1, "average").objective == pytest.approx(26 / 3)


def test_hierarchical_unknown_linkage(four_points):
    with pytest.raises(ValueError):
        hierarchical(four_points, 2, "ward")


def test_fcm_two_points_identity():
    fm = fuzzy_cmeans(np.array([[0.0], [1.0]]), 2, seed=0)
    assert np.allclose(np.sort(fm.u, axis=1)[:, ::-1], [[1, 0], [1, 0]])
    assert np.array_equal(harden(fm).labels, np.argmax(fm.u, axis=1))


def test_fcm_rows_sum_to_one_and_k1():
    x = np.random.default_rng(3).normal(size=(30, 2))
    fm = fuzzy_cmeans(x, 3, seed=1)
    assert np.allclose(fm.u.sum(axis=1), 1.0)
    assert (fuzzy_cmeans(x, 1).u == 1.0).all()


def test_fcm_point_on_center_is_one_hot():
    from cohortclust.engines import _fcm_memberships
    u = _fcm_memberships(np.array([[0.0, 4.0], [1.0, 1.0]]), 2.0)
    assert u[0].tolist() == [1.0, 0.0]
    assert u[1].tolist() == [0.5, 0.5]


def test_fcm_fixed_point():
    # at convergence, centers equal the membership-weighted means
    x = np.random.default_rng(4).normal(size=(25, 2))
    fm = fuzzy_cmeans(x, 2, seed=0, eps=1e-10, max_iter=2000)
    w = fm.u ** 2
    assert np.allclose((w.T @ x) / w.sum(0)[:, None], fm.centers, atol=1e-6)


def test_harden_examples():
    assert harden(FuzzyMembership(np.array([[0.7, 0.3], [0.2, 0.8]]), 2.0)).labels.tolist() == [0, 1]
    assert harden(FuzzyMembership(np.array([[0.5, 0.5], [0.1, 0.9]]), 2.0)).labels.tolist() == [0, 1]
    assert harden(FuzzyMembership(np.eye(3), 2.0)).labels.tolist() == [0, 1, 2]


def test_harden_repairs_empty_cluster():
    u = np.array([[0.6, 0.4], [0.9, 0.1], [0.8, 0.2]])
    assert harden(FuzzyMembership(u, 2.0)).labels.tolist() == [1, 0, 0]


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(np.array([0, 0, 2]), 3)
    with pytest.raises(ValueError):
        Partition(np.array([0, 1]), 3)


def _ds(cols, kinds, roles):
    specs = tuple(AttributeSpec(f"c{j}", k, r) for j, (k, r) in enumerate(zip(kinds, roles)))
    v = np.array(cols, dtype=float).T
    return Dataset(specs, v, np.zeros_like(v, bool), tuple(str(i) for i in range(v.shape[0])))


def test_prepare_matrix():
    d = _ds([[1, 0, 1], [0, 0, 1]], ["binary", "binary"], ["marker", "marker"])
    assert prepare_matrix(d).values.tolist() == [[1, 0], [0, 0], [1, 1]]
    d = _ds([[10, 20, 30], [5, 6, 7]], ["continuous", "continuous"], ["marker", "outcome"])
    m = prepare_matrix(d)
    assert m.values.tolist() == [[0.0], [0.5], [1.0]] and m.columns == ("c0",)
    d = _ds([[3, 3, 3], [2, 1, 2]], ["continuous", "categorical"], ["clinical", "marker"])
    m = prepare_matrix(d)
    assert m.columns == ("c0", "c1=1", "c1=2") and m.warnings
    assert m.values.tolist() == [[0, 0, 1], [0, 1, 0], [0, 0, 1]]


def test_matrix_rejects_nan():
    with pytest.raises(ValueError):
        Matrix(np.array([[np.nan]]))


def test_run_all_engines_agree_on_separated_data(four_points):
    parts = run_all(Matrix(four_points), 2, seed=0)
    assert {tuple(map(tuple, groups_of(p))) for p in parts.values()} == {((0, 1), (2, 3))}
