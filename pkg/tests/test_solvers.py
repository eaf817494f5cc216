import math
from itertools import combinations

import numpy as np
import pytest

from straggler_cluster.core import CostKind, WeightedDataset, assign, cost_points, cost_subspaces
from straggler_cluster.solvers import (
    SolverOptions,
    jacobi_svd,
    kmedian_exact,
    kmedian_heuristic,
    r_pca,
    subspace_cluster,
    svd,
    weiszfeld,
)


def line(values, weights=None):
    return WeightedDataset.from_points(np.asarray(values, dtype=float).reshape(-1, 1), weights)


def brute_force_medoids(P, k):
    best = math.inf
    for combo in combinations(range(P.n), k):
        best = min(best, cost_points(P, P.points[list(combo)]))
    return best


def test_kmedian_exact_examples():
    C, cost = kmedian_exact(line([0, 1, 10]), 1)
    assert C.centers.tolist() == [[1.0]] and cost == 10.0
    C, cost = kmedian_exact(line([0, 10], [1, 5]), 1)
    assert C.centers.tolist() == [[10.0]] and cost == 10.0
    P = WeightedDataset.from_points(np.arange(10.0).reshape(5, 2))
    C, cost = kmedian_exact(P, 5)
    assert cost == 0.0 and sorted(map(tuple, C.centers)) == sorted(map(tuple, P.points))


def test_kmedian_exact_matches_brute_force(rng):
    for _ in range(30):
        n = int(rng.integers(2, 10))
        P = WeightedDataset.from_points(rng.standard_normal((n, 2)), rng.uniform(0.1, 2, n))
        k = int(rng.integers(1, min(4, n) + 1))
        assert kmedian_exact(P, k)[1] == pytest.approx(brute_force_medoids(P, k), rel=1e-12)


def test_kmedian_exact_rejects_large_n():
    with pytest.raises(ValueError):
        kmedian_exact(line(range(21)), 2)


def test_heuristic_examples():
    P = WeightedDataset.from_points([(0, 0), (3, 1), (7, 7)])
    assert kmedian_heuristic(P, 3, seed=1)[1] == 0.0
    for seed in range(10):
        cost = kmedian_heuristic(line([0, 1, 10]), 1, seed)[1]
        assert 10.0 - 1e-9 <= cost <= 11.0
    pairs = WeightedDataset.from_points([(0, 0), (0, 1), (100, 0), (100, 1)])
    assert kmedian_heuristic(pairs, 2, seed=0)[1] == pytest.approx(2.0, abs=1e-6)


def test_heuristic_never_beats_continuous_lower_bound_trivially(rng):
    # the heuristic is continuous, so it can beat the medoid optimum; it must
    # still stay within the factor 2 that separates the two optima
    for _ in range(100):
        n = int(rng.integers(3, 13))
        P = WeightedDataset.from_points(rng.standard_normal((n, 2)) * 3, rng.uniform(0.2, 2, n))
        k = int(rng.integers(1, 4))
        exact = kmedian_exact(P, k)[1]
        heur = kmedian_heuristic(P, k, seed=int(rng.integers(1000)))[1]
        assert heur >= exact / 2 - 1e-9


def test_heuristic_vs_exact_on_medoid_candidates(rng):
    # restricted to candidate centers drawn from the data, the heuristic
    # output snapped to members cannot beat the exact discrete optimum
    for _ in range(100):
        n = int(rng.integers(3, 13))
        P = WeightedDataset.from_points(rng.standard_normal((n, 2)), rng.uniform(0.2, 2, n))
        k = int(rng.integers(1, 4))
        C, _ = kmedian_heuristic(P, k, seed=3)
        labels, _ = assign(P.points, C.centers)
        snapped = []
        for c in range(C.k):
            members = P.points[labels == c]
            if len(members):
                snapped.append(members[np.argmin(np.linalg.norm(members - C.centers[c], axis=1))])
        assert cost_points(P, np.array(snapped)) >= kmedian_exact(P, k)[1] - 1e-9


def test_medoid_restriction_factor_two(rng):
    for _ in range(100):
        n = int(rng.integers(3, 13))
        P = WeightedDataset.from_points(rng.standard_normal((n, 2)), rng.uniform(0.2, 2, n))
        k = int(rng.integers(1, 4))
        C = rng.standard_normal((k, 2))
        labels, _ = assign(P.points, C)
        snapped = []
        for c in range(k):
            members = P.points[labels == c]
            if len(members):
                snapped.append(members[np.argmin(np.linalg.norm(members - C[c], axis=1))])
        snapped = np.array(snapped)
        assert cost_points(P, snapped) <= 2 * cost_points(P, C) + 1e-9
        assert kmedian_exact(P, min(k, n))[1] <= cost_points(P, snapped) + 1e-9


def test_heuristic_is_seed_deterministic(rng):
    P = WeightedDataset.from_points(rng.standard_normal((200, 3)), rng.uniform(0, 2, 200))
    a = kmedian_heuristic(P, 5, seed=11)
    b = kmedian_heuristic(P, 5, seed=11)
    assert np.array_equal(a[0].centers, b[0].centers) and a[1] == b[1]


def test_heuristic_options_restarts_do_not_hurt(rng):
    P = WeightedDataset.from_points(rng.standard_normal((300, 2)) * 5)
    one = kmedian_heuristic(P, 6, seed=2, options=SolverOptions(n_init=1))[1]
    three = kmedian_heuristic(P, 6, seed=2, options=SolverOptions(n_init=3))[1]
    assert three <= one + 1e-9


def test_weiszfeld_not_worse_than_centroid(rng):
    for _ in range(50):
        n = int(rng.integers(1, 30))
        X = rng.standard_normal((n, 3)) * rng.uniform(0.1, 10)
        w = rng.uniform(0.1, 3, n)
        z = weiszfeld(X, w)
        centroid = (w @ X) / w.sum()
        P = WeightedDataset.from_points(X, w)
        assert cost_points(P, z[None]) <= cost_points(P, centroid[None]) + 1e-12


def test_weiszfeld_stops_at_data_point():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    z = weiszfeld(X, [10.0, 1.0, 1.0])
    assert np.allclose(z, [0.0, 0.0], atol=1e-12)


def test_weiszfeld_collinear_median():
    z = weiszfeld(np.array([[0.0], [1.0], [10.0]]))
    assert z[0] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("M, expected", [
    (np.eye(2), [1.0, 1.0]),
    (np.array([[3.0, 0.0], [0.0, 4.0]]), [4.0, 3.0]),
    (np.array([[1.0, 1.0], [1.0, 1.0]]), [2.0, 0.0]),
])
def test_svd_examples(M, expected):
    for fn in (svd, jacobi_svd):
        _, S, _ = fn(M)
        assert np.allclose(S, expected, atol=1e-12)


def test_svd_contract_and_jacobi_oracle(rng):
    for _ in range(40):
        m, n = int(rng.integers(1, 15)), int(rng.integers(1, 15))
        M = rng.standard_normal((m, n))
        for fn in (svd, jacobi_svd):
            U, S, Vt = fn(M)
            assert np.allclose(U * S @ Vt, M, atol=1e-10)
            assert np.allclose(Vt @ Vt.T, np.eye(Vt.shape[0]), atol=1e-10)
            assert np.all(np.diff(S) <= 1e-12)
        assert np.allclose(svd(M)[1], jacobi_svd(M)[1], atol=1e-10)


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        svd(np.array([[1.0, np.inf]]))


def test_r_pca_examples():
    L, cost = r_pca(WeightedDataset.from_points([(1, 0), (2, 0)]), 1)
    assert cost == 0.0 and abs(L.bases[0][0, 0]) == pytest.approx(1.0)
    assert r_pca(WeightedDataset.from_points(np.eye(2)), 1)[1] == pytest.approx(1.0)
    L, cost = r_pca(WeightedDataset.from_points([(1, 0), (0, 1)], [1.0, 4.0]), 1)
    assert abs(L.bases[0][1, 0]) == pytest.approx(1.0) and cost == pytest.approx(1.0)
    with pytest.raises(ValueError):
        r_pca(WeightedDataset.from_points(np.eye(2)), 0)


def test_r_pca_residual_is_discarded_energy(rng):
    for _ in range(100):
        n, d = int(rng.integers(2, 30)), int(rng.integers(2, 10))
        r = int(rng.integers(1, d))
        P = WeightedDataset.from_points(rng.standard_normal((n, d)), rng.uniform(0.1, 3, n))
        _, S, _ = jacobi_svd(np.sqrt(P.weights)[:, None] * P.points)
        expected = math.fsum((S[r:] ** 2).tolist())
        assert r_pca(P, r)[1] == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_subspace_cluster_k1_is_pca(rng):
    P = WeightedDataset.from_points(rng.standard_normal((40, 4)))
    L, cost = subspace_cluster(P, 2, 1, seed=5)
    L2, cost2 = r_pca(P, 2)
    assert cost == cost2 and np.array_equal(L.bases[0], L2.bases[0])


def test_subspace_cluster_planted_lines(rng):
    t = rng.standard_normal(60)
    pts = np.vstack([np.c_[t[:30], np.zeros(30)], np.c_[np.zeros(30), t[30:]]])
    L, cost = subspace_cluster(WeightedDataset.from_points(pts), 1, 2, seed=0)
    assert cost <= 1e-8


def test_subspace_cluster_deterministic_and_validated(rng):
    P = WeightedDataset.from_points(rng.standard_normal((50, 3)))
    a = subspace_cluster(P, 1, 3, seed=4)
    b = subspace_cluster(P, 1, 3, seed=4)
    assert a[1] == b[1] and all(np.array_equal(x, y) for x, y in zip(a[0].bases, b[0].bases))
    assert a[1] == pytest.approx(cost_subspaces(P, a[0]))
    with pytest.raises(ValueError):
        subspace_cluster(P, 3, 2)
    with pytest.raises(ValueError):
        subspace_cluster(P, 0, 2)


def test_kmeans_exact_kind():
    C, cost = kmedian_exact(line([0, 1, 10]), 1, CostKind.KMEANS)
    assert C.centers.tolist() == [[1.0]] and cost == 82.0
