"""Local and coordinator-side solvers.

* ``kmedian_exact``: brute force over k-subsets of the data (medoid k-median);
  the oracle for small instances.
* ``kmedian_heuristic``: D-weighted seeding followed by assign / Weiszfeld
  alternation, centers anywhere in R^d.
* ``svd`` / ``r_pca`` / ``subspace_cluster``: PCA and k-subspaces for the
  squared-residual objective.
* ``jacobi_svd``: a one-sided Jacobi SVD kept independent of LAPACK, used as a
  cross-check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CenterSet,
    CostKind,
    SubspaceSet,
    WeightedDataset,
    _as_weighted,
    assign,
    center_distances,
    cost_points,
    cost_subspaces,
    subspace_residuals,
)

EXACT_MAX_N = 20
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    """Iteration caps and tolerances shared by the heuristic solvers."""

    max_rounds: int = 100
    tol: float = 1e-6
    weiszfeld_iters: int = 100
    weiszfeld_tol: float = 1e-7
    n_init: int = 1


DEFAULTS = SolverOptions()


def kmedian_exact(P, k: int, kind: CostKind = CostKind.KMEDIAN) -> tuple[CenterSet, float]:
    """Best k-subset of the data points as centers.

    Ties go to the lexicographically smallest index tuple.
    """
    P = _as_weighted(P)
    n = P.n
    if n > EXACT_MAX_N:
        raise ValueError(f"exact solver limited to n <= {EXACT_MAX_N}, got n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    D = center_distances(P.points, P.points, squared=kind is CostKind.KMEANS)
    w = P.weights
    best_cost, best_combo = math.inf, None
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = np.array(list(itertools.islice(combos, 4096)), dtype=np.int64).reshape(-1, k)
        if chunk.size == 0:
            break
        costs = w @ D[:, chunk].min(axis=2)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost, best_combo = float(costs[i]), chunk[i]
    centers = CenterSet(P.points[best_combo])
    return centers, cost_points(P, centers, kind)


def _weiszfeld_batch(X, w, labels, k, start, max_iter, tol):
    """Run Weiszfeld iterations for all k clusters at once.

    A cluster stops when its iterate lands on one of its (positive-weight)
    points, or when it moves less than ``tol`` relative to its scale.
    """
    Z = np.array(start, dtype=np.float64)
    wsum = np.bincount(labels, weights=w, minlength=k)
    active = wsum > 0
    pos = w > 0
    for _ in range(max_iter):
        if not active.any():
            break
        dist = np.linalg.norm(X - Z[labels], axis=1)
        hit = pos & (dist < SNAP_TOL)
        if hit.any():
            active[np.unique(labels[hit])] = False
        m = active[labels] & pos
        inv = np.zeros_like(dist)
        inv[m] = w[m] / dist[m]
        den = np.bincount(labels, weights=inv, minlength=k)
        num = np.stack([np.bincount(labels, weights=inv * X[:, j], minlength=k) for j in range(X.shape[1])], axis=1)
        upd = active & (den > 0)
        Znew = Z.copy()
        Znew[upd] = num[upd] / den[upd, None]
        spread = np.bincount(labels, weights=w * dist, minlength=k) / np.where(wsum > 0, wsum, 1.0)
        scale = np.maximum(np.linalg.norm(Znew, axis=1), spread)
        moved = np.linalg.norm(Znew - Z, axis=1)
        Z = Znew
        active &= ~(moved <= tol * np.maximum(scale, np.finfo(float).tiny))
    return _snap_to_optimal_points(X, w, labels, k, Z)


def _snap_to_optimal_points(X, w, labels, k, Z):
    """Move each center onto its nearest member x_m when x_m is itself a geometric median.

    x_m is optimal iff |sum_{j != m} w_j (x_j - x_m) / |x_j - x_m|| <= w_m;
    Weiszfeld only approaches such points linearly.
    """
    Z = Z.copy()
    for c in range(k):
        idx = np.flatnonzero((labels == c) & (w > 0))
        if idx.size == 0:
            continue
        Xc, wc = X[idx], w[idx]
        m = int(np.argmin(np.linalg.norm(Xc - Z[c], axis=1)))
        diff = Xc - Xc[m]
        dist = np.linalg.norm(diff, axis=1)
        same = dist == 0
        pull = (wc[~same, None] * diff[~same] / dist[~same, None]).sum(axis=0)
        if np.linalg.norm(pull) <= wc[same].sum():
            Z[c] = Xc[m]
    return Z


def _cluster_costs(X, w, labels, k, Z):
    return np.bincount(labels, weights=w * np.linalg.norm(X - Z[labels], axis=1), minlength=k)


def weiszfeld(points, weights=None, start=None, max_iter: int = 100, tol: float = 1e-7) -> np.ndarray:
    """Weighted geometric median of a point set.

    Starts from the weighted centroid unless ``start`` is given.
    """
    P = WeightedDataset.from_points(points, weights)
    X, w = P.points, P.weights
    if start is None:
        start = (w @ X) / w.sum() if w.sum() > 0 else X[0]
    labels = np.zeros(P.n, dtype=np.int64)
    return _weiszfeld_batch(X, w, labels, 1, np.asarray(start, dtype=np.float64)[None, :], max_iter, tol)[0]


def _d1_seeding(X, w, k, rng):
    n = X.shape[0]
    idx = np.empty(k, dtype=np.int64)

    def pick(score):
        total = score.sum()
        if total <= 0:
            return int(rng.integers(n))
        j = int(np.searchsorted(np.cumsum(score), rng.random() * total, side="right"))
        return min(j, n - 1)

    idx[0] = pick(w)
    mind = np.linalg.norm(X - X[idx[0]], axis=1)
    for c in range(1, k):
        idx[c] = pick(w * mind)
        mind = np.minimum(mind, np.linalg.norm(X - X[idx[c]], axis=1))
    return X[idx].copy()


def _reseed_empty(X, w, C, labels, dist):
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return C, labels, dist, False
    C = C.copy()
    for c in empty:
        j = int(np.argmax(w * dist))
        C[c] = X[j]
        dist = np.minimum(dist, np.linalg.norm(X - X[j], axis=1))
    labels, dist = assign(X, C)
    return C, labels, dist, True


def _alternate(X, w, C, opts: SolverOptions):
    k = C.shape[0]
    labels, dist = assign(X, C)
    cost = math.fsum((w * dist).tolist())
    for _ in range(opts.max_rounds):
        C, labels, dist, _ = _reseed_empty(X, w, C, labels, dist)
        cost = math.fsum((w * dist).tolist())
        wsum = np.bincount(labels, weights=w, minlength=k)
        centroid = np.stack([np.bincount(labels, weights=w * X[:, j], minlength=k) for j in range(X.shape[1])], axis=1)
        has_w = wsum > 0
        centroid[has_w] /= wsum[has_w, None]
        centroid[~has_w] = C[~has_w]
        Z = _weiszfeld_batch(X, w, labels, k, centroid, opts.weiszfeld_iters, opts.weiszfeld_tol)
        # keep, per cluster, the cheapest of: current center, centroid, Weiszfeld result
        cands = np.stack([C, centroid, Z])
        costs = np.stack([_cluster_costs(X, w, labels, k, cand) for cand in cands])
        newC = cands[np.argmin(costs, axis=0), np.arange(k)]
        new_labels, new_dist = assign(X, newC)
        new_cost = math.fsum((w * new_dist).tolist())
        if new_cost > cost:
            break
        improvement = cost - new_cost
        C, labels, dist = newC, new_labels, new_dist
        previous, cost = cost, new_cost
        if improvement <= opts.tol * previous:
            break
    return C, cost


def kmedian_heuristic(P, k: int, seed: int = 0, options: SolverOptions = DEFAULTS) -> tuple[CenterSet, float]:
    """Weighted k-median with centers in R^d.

    Seeding samples the first center proportionally to weight and each
    further one proportionally to w(p) * d(p, C). Alternation then assigns
    points to their nearest center and moves each center to the weighted
    geometric median of its cluster. The cost never increases between rounds.
    """
    P = _as_weighted(P)
    if not 1 <= k <= P.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={P.n}")
    X, w = P.points, P.weights
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, options.n_init)):
        C0 = _d1_seeding(X, w, k, rng)
        C, cost = _alternate(X, w, C0, options)
        if best is None or cost < best[1]:
            best = (C, cost)
    centers = CenterSet(best[0])
    return centers, cost_points(P, centers, CostKind.KMEDIAN)


def svd(M, full_matrices: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with singular values in descending order (LAPACK backend)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"svd expects a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("svd input has non-finite entries")
    return np.linalg.svd(M, full_matrices=full_matrices)


def _complete_columns(Q: np.ndarray, m: int) -> np.ndarray:
    """Extend orthonormal columns Q (m x j) to m x m with the standard basis."""
    cols = [Q[:, i] for i in range(Q.shape[1])]
    for e in np.eye(m):
        if len(cols) == m:
            break
        v = e.copy()
        for _ in range(2):
            for c in cols:
                v -= (c @ v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
    return np.stack(cols, axis=1)


def jacobi_svd(M, tol: float = 1e-15, max_sweeps: int = 80) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided (Hestenes) Jacobi SVD, thin form, descending singular values."""
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise ValueError("svd input has non-finite entries")
    if M.shape[0] < M.shape[1]:
        U, S, Vt = jacobi_svd(M.T, tol, max_sweeps)
        return Vt.T, S, U.T
    A = M.copy()
    n = A.shape[1]
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = A[:, p] @ A[:, p]
                beta = A[:, q] @ A[:, q]
                gamma = A[:, p] @ A[:, q]
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    S = np.linalg.norm(A, axis=0)
    order = np.argsort(-S, kind="stable")
    S, A, V = S[order], A[:, order], V[:, order]
    rank = int(np.sum(S > S[0] * 1e-14)) if S.size and S[0] > 0 else 0
    U = np.zeros_like(A)
    U[:, :rank] = A[:, :rank] / S[:rank]
    if rank < n:
        U = _complete_columns(U[:, :rank], A.shape[0])[:, :n]
    return U, S, V.T


def r_pca(P, r: int) -> tuple[SubspaceSet, float]:
    """Best-fitting r-dimensional linear subspace under weights (rows scaled by sqrt(w))."""
    P = _as_weighted(P)
    if not 1 <= r <= P.dim:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={P.dim}")
    M = np.sqrt(P.weights)[:, None] * P.points
    _, _, Vt = svd(M, full_matrices=P.n < r)
    L = SubspaceSet((Vt[:r].T,))
    return L, cost_subspaces(P, L)


def _random_basis(d, r, rng):
    q, _ = np.linalg.qr(rng.standard_normal((d, r)))
    return q


def _reseed_subspace(P: WeightedDataset, resid, r):
    """Fit a memberless subspace to the r worst-served points."""
    worst = np.argsort(-(P.weights * resid), kind="stable")[:r]
    return r_pca(P.subset(worst), r)[0].bases[0]


def _ksubspaces_once(P: WeightedDataset, r, k, rng, opts: SolverOptions):
    X, w = P.points, P.weights
    groups = np.array_split(rng.permutation(P.n), k)
    bases = []
    for g in groups:
        sub = P.subset(g)
        if g.size >= r and sub.total_weight > 0:
            bases.append(r_pca(sub, r)[0].bases[0])
        else:
            bases.append(_random_basis(P.dim, r, rng))
    L = SubspaceSet(tuple(bases))
    resid = subspace_residuals(X, L)
    labels = np.argmin(resid, axis=1)
    cost = math.fsum((w * resid[np.arange(P.n), labels]).tolist())
    for _ in range(opts.max_rounds):
        bases = list(L.bases)
        for c in range(k):
            members = np.flatnonzero((labels == c) & (w > 0))
            if members.size >= r:
                bases[c] = r_pca(P.subset(members), r)[0].bases[0]
            elif members.size == 0:
                bases[c] = _reseed_subspace(P, resid[np.arange(P.n), labels], r)
        newL = SubspaceSet(tuple(bases))
        resid = subspace_residuals(X, newL)
        new_labels = np.argmin(resid, axis=1)
        new_cost = math.fsum((w * resid[np.arange(P.n), new_labels]).tolist())
        if new_cost > cost:
            break
        improvement = cost - new_cost
        previous = cost
        L, labels, cost = newL, new_labels, new_cost
        if improvement <= opts.tol * previous:
            break
    return L, cost


def subspace_cluster(P, r: int, k: int, seed: int = 0,
                     options: SolverOptions = SolverOptions(n_init=5)) -> tuple[SubspaceSet, float]:
    """k linear r-subspaces by alternating assignment and per-cluster PCA.

    With k = 1 this is exactly ``r_pca``. Each restart seeds its subspaces
    from the PCA of a random split of the points into k groups; the cheapest
    restart wins.
    """
    P = _as_weighted(P)
    if not 1 <= r < P.dim:
        raise ValueError(f"need 1 <= r < d, got r={r}, d={P.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return r_pca(P, r)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, options.n_init)):
        L, cost = _ksubspaces_once(P, r, k, rng, options)
        if best is None or cost < best[1]:
            best = (L, cost)
    return best[0], cost_subspaces(P, best[0])
