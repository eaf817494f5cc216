import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from straggler_cluster.core import (
    CenterSet,
    CostKind,
    Dataset,
    SubspaceSet,
    WeightedDataset,
    assign,
    cluster_of,
    cost_points,
    cost_subspaces,
    distance,
    load_csv,
    save_csv,
)

coords = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def point_arrays(max_n=12, max_d=4):
    return st.integers(1, max_d).flatmap(
        lambda d: arrays(np.float64, st.tuples(st.integers(1, max_n), st.just(d)), elements=coords))


@pytest.mark.parametrize("x, y, expected", [
    ((0, 0), (0, 0), 0.0),
    ((0, 0), (3, 4), 5.0),
    ((1, 1), (2, 2), math.sqrt(2)),
])
def test_distance_examples(x, y, expected):
    assert distance(x, y) == pytest.approx(expected, abs=1e-12)


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        distance((0, 0), (0, 0, 0))


def test_triangle_inequality(rng):
    for _ in range(1000):
        x, y, z = rng.standard_normal((3, 5)) * 10
        assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-9


@pytest.mark.parametrize("x, C, expected", [
    ((0, 0), [(0, 0), (5, 5)], 0),
    ((1, 0), [(0, 0), (2, 0)], 0),
    ((9, 0), [(0, 0), (10, 0)], 1),
])
def test_cluster_of_examples(x, C, expected):
    assert cluster_of(x, CenterSet(C)) == expected


def test_cost_points_examples():
    P = WeightedDataset.from_points([(0, 0), (2, 0)])
    assert cost_points(P, CenterSet([(0, 0)]), CostKind.KMEDIAN) == 2.0
    assert cost_points(P, CenterSet([(1, 0)]), CostKind.KMEANS) == 2.0
    assert cost_points(WeightedDataset.from_points([(0, 0)], [3.0]), CenterSet([(0, 4)])) == 12.0


def test_cost_subspaces_examples():
    e1 = SubspaceSet((np.array([[1.0], [0.0]]),))
    assert cost_subspaces(WeightedDataset.from_points([(1, 0), (2, 0)]), e1) == 0.0
    assert cost_subspaces(WeightedDataset.from_points([(0, 1)]), e1) == 1.0
    assert cost_subspaces(WeightedDataset.from_points([(1, 1)]), e1) == pytest.approx(1.0, rel=1e-12)


def test_r0_subspace_is_kmeans_at_origin(rng):
    pts = rng.standard_normal((30, 3))
    w = rng.uniform(0, 2, 30)
    P = WeightedDataset.from_points(pts, w)
    L0 = SubspaceSet((np.zeros((3, 0)),))
    assert L0.r == 0
    assert cost_subspaces(P, L0) == pytest.approx(cost_points(P, CenterSet([[0, 0, 0]]), CostKind.KMEANS), rel=1e-12)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        Dataset([[0.0, np.nan]])
    with pytest.raises(ValueError):
        WeightedDataset.from_points([[0.0], [1.0]], [1.0, -1.0])
    with pytest.raises(ValueError):
        WeightedDataset.from_points([[0.0], [1.0]], [1.0])
    with pytest.raises(ValueError):
        SubspaceSet((np.array([[1.0], [1.0]]),))
    with pytest.raises(ValueError):
        CenterSet(np.zeros((0, 2)))


def test_values_are_immutable():
    P = WeightedDataset.from_points([[1.0, 2.0]])
    with pytest.raises(ValueError):
        P.points[0, 0] = 5.0
    with pytest.raises(ValueError):
        P.weights[0] = 5.0


def test_assign_lowest_index_tie():
    labels, dist = assign(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]]))
    assert labels.tolist() == [0] and dist.tolist() == [1.0]


@given(point_arrays(), st.floats(0, 10))
def test_weight_scaling_is_linear(pts, lam):
    P = WeightedDataset.from_points(pts)
    C = CenterSet(pts[:1] + 1.0)
    L = SubspaceSet((np.eye(pts.shape[1])[:, :1],))
    for kind in CostKind:
        assert cost_points(P.scaled(lam), C, kind) == pytest.approx(lam * cost_points(P, C, kind), rel=1e-9, abs=1e-9)
    assert cost_subspaces(P.scaled(lam), L) == pytest.approx(lam * cost_subspaces(P, L), rel=1e-9, abs=1e-9)


@given(point_arrays(), st.data())
def test_cost_monotone_in_centers(pts, data):
    P = WeightedDataset.from_points(pts)
    d = pts.shape[1]
    C = data.draw(arrays(np.float64, (data.draw(st.integers(1, 4)), d), elements=coords))
    extra = data.draw(arrays(np.float64, (data.draw(st.integers(1, 4)), d), elements=coords))
    for kind in CostKind:
        assert cost_points(P, np.vstack([C, extra]), kind) <= cost_points(P, C, kind) * (1 + 1e-12) + 1e-12


@given(point_arrays())
def test_cost_zero_iff_on_centers(pts):
    P = WeightedDataset.from_points(pts)
    assert cost_points(P, CenterSet(pts)) == 0.0
    shifted = pts + 1.0
    assert cost_points(P, CenterSet(shifted[:1])) > 0 or np.allclose(pts, shifted[:1])


def test_zero_weight_points_do_not_count():
    P = WeightedDataset.from_points([(0, 0), (5, 5)], [1.0, 0.0])
    assert cost_points(P, CenterSet([(0, 0)])) == 0.0


def test_csv_roundtrip_with_header_and_weights(tmp_path, rng):
    P = WeightedDataset.from_points(rng.standard_normal((7, 3)), rng.uniform(0, 3, 7))
    path = tmp_path / "p.csv"
    save_csv(path, P, include_weights=True)
    assert path.read_text().splitlines()[0] == "x0,x1,x2,weight"
    Q = load_csv(path, weight_column=True)
    assert np.array_equal(Q.points, P.points) and np.array_equal(Q.weights, P.weights)


def test_csv_without_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("1,2\n3,4\n")
    Q = load_csv(path)
    assert Q.points.tolist() == [[1, 2], [3, 4]] and Q.weights.tolist() == [1, 1]
    path.write_text("a,b\n")
    with pytest.raises(ValueError):
        load_csv(path)
