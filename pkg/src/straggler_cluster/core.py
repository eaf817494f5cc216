"""Datasets, Euclidean distances, and clustering cost functions.

Everything here is a pure function of immutable inputs. Point arrays are
stored as read-only float64 numpy arrays so values can be shared freely.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ORTHONORMAL_TOL = 1e-8


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class CostKind(enum.Enum):
    KMEDIAN = "kmedian"
    KMEANS = "kmeans"

    @property
    def power(self) -> int:
        return 1 if self is CostKind.KMEDIAN else 2


@dataclass(frozen=True)
class Dataset:
    """n points in R^d; row j is point p_j."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points, 2)
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 points of dimension d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class WeightedDataset:
    """A dataset with a non-negative weight per point."""

    base: Dataset
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, 1)
        if w.shape[0] != self.base.n:
            raise ValueError(f"{w.shape[0]} weights for {self.base.n} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights=None) -> "WeightedDataset":
        base = Dataset(points)
        if weights is None:
            weights = np.ones(base.n)
        return cls(base, weights)

    @property
    def points(self) -> np.ndarray:
        return self.base.points

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def subset(self, indices) -> "WeightedDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return WeightedDataset(Dataset(self.points[idx]), self.weights[idx])

    def scaled(self, factor: float) -> "WeightedDataset":
        return WeightedDataset(self.base, self.weights * factor)


@dataclass(frozen=True)
class CenterSet:
    centers: np.ndarray

    def __post_init__(self):
        c = _frozen(self.centers, 2)
        if c.shape[0] < 1:
            raise ValueError("a center set needs at least one center")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class SubspaceSet:
    """k linear subspaces, each given by a d x r matrix with orthonormal columns."""

    bases: tuple

    def __post_init__(self):
        bases = tuple(np.array(b, dtype=np.float64) for b in self.bases)
        if not bases:
            raise ValueError("a subspace set needs at least one subspace")
        d, r = bases[0].shape
        for b in bases:
            if b.ndim != 2 or b.shape != (d, r):
                raise ValueError("all bases must share shape (d, r)")
            if r > d:
                raise ValueError(f"subspace dimension r={r} exceeds ambient d={d}")
            if np.max(np.abs(b.T @ b - np.eye(r)), initial=0.0) > ORTHONORMAL_TOL:
                raise ValueError("basis columns are not orthonormal")
            b.setflags(write=False)
        object.__setattr__(self, "bases", bases)

    @property
    def k(self) -> int:
        return len(self.bases)

    @property
    def r(self) -> int:
        return self.bases[0].shape[1]

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]


def _as_weighted(P) -> WeightedDataset:
    if isinstance(P, WeightedDataset):
        return P
    if isinstance(P, Dataset):
        return WeightedDataset(P, np.ones(P.n))
    return WeightedDataset.from_points(P)


def _as_centers(C) -> np.ndarray:
    if isinstance(C, CenterSet):
        return C.centers
    return CenterSet(C).centers


def distance(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return math.sqrt(math.fsum((x - y) ** 2))


def center_distances(points: np.ndarray, centers: np.ndarray, squared: bool = False) -> np.ndarray:
    """(n, k) matrix of distances from each point to each center.

    Differences are formed explicitly instead of expanding |x|^2 + |c|^2 - 2x.c,
    which keeps exact zeros exact.
    """
    if points.shape[1] != centers.shape[1]:
        raise ValueError(f"dimension mismatch: points d={points.shape[1]}, centers d={centers.shape[1]}")
    out = np.empty((points.shape[0], centers.shape[0]))
    step = max(1, 2_000_000 // max(1, centers.size))
    for lo in range(0, points.shape[0], step):
        diff = points[lo:lo + step, None, :] - centers[None, :, :]
        out[lo:lo + step] = np.einsum("nkd,nkd->nk", diff, diff)
    return out if squared else np.sqrt(out)


def assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels (lowest index wins ties) and the matching distances."""
    dist = center_distances(points, centers)
    labels = np.argmin(dist, axis=1)
    return labels, dist[np.arange(points.shape[0]), labels]


def cluster_of(x, C) -> int:
    centers = _as_centers(C)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    labels, _ = assign(x, centers)
    return int(labels[0])


def _weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    return math.fsum((weights * values).tolist())


def cost_points(P, C, kind: CostKind = CostKind.KMEDIAN) -> float:
    """sum_j w_j * d(p_j, C)^m with m = 1 for k-median and 2 for k-means."""
    P = _as_weighted(P)
    centers = _as_centers(C)
    sq = center_distances(P.points, centers, squared=True).min(axis=1)
    vals = sq if kind is CostKind.KMEANS else np.sqrt(sq)
    return _weighted_sum(P.weights, vals)


def subspace_residuals(points: np.ndarray, L: SubspaceSet) -> np.ndarray:
    """(n, k) squared distances from each point to each subspace."""
    if points.shape[1] != L.dim:
        raise ValueError(f"dimension mismatch: points d={points.shape[1]}, subspaces d={L.dim}")
    out = np.empty((points.shape[0], L.k))
    for i, B in enumerate(L.bases):
        resid = points - (points @ B) @ B.T
        out[:, i] = np.einsum("nd,nd->n", resid, resid)
    return np.maximum(out, 0.0)


def cost_subspaces(P, L: SubspaceSet) -> float:
    """sum_j w_j * min_i d^2(p_j, L_i) for linear subspaces L_i."""
    P = _as_weighted(P)
    if not isinstance(L, SubspaceSet):
        L = SubspaceSet(L)
    return _weighted_sum(P.weights, subspace_residuals(P.points, L).min(axis=1))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, weight_column: bool = False) -> WeightedDataset:
    """Read one point per row; a non-numeric first row is treated as a header.

    With ``weight_column`` the last column holds the point weights.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array([[float(c) for c in row] for row in rows])
    if weight_column:
        if data.shape[1] < 2:
            raise ValueError(f"{path}: weight column requested but only one column present")
        return WeightedDataset.from_points(data[:, :-1], data[:, -1])
    return WeightedDataset.from_points(data)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_rows(path, rows: Sequence[Sequence], header: Sequence[str] | None = None) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def save_csv(path, P, include_weights: bool = False) -> None:
    P = _as_weighted(P)
    header = [f"x{i}" for i in range(P.dim)] + (["weight"] if include_weights else [])
    rows = []
    for p, w in zip(P.points, P.weights):
        row = [float(v) for v in p]
        if include_weights:
            row.append(float(w))
        rows.append(row)
    write_rows(path, rows, header)
