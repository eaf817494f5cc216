"""Coresets, relaxed SVD coresets, and recovery-weighted merging."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .assignment import RecoveryVector
from .core import Dataset, WeightedDataset, _as_weighted, load_csv, save_csv
from .solvers import svd


@dataclass(frozen=True)
class Coreset:
    """A weighted summary of ``source_size`` points.

    ``epsilon`` is None when the construction carries no guarantee.
    """

    summary: WeightedDataset
    epsilon: float | None
    source_size: int

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def guaranteed(self) -> bool:
        return self.epsilon is not None

    @property
    def in_definition_range(self) -> bool:
        """Whether epsilon lies in [0, 1/3), where coreset solutions transfer."""
        return self.epsilon is not None and self.epsilon < 1.0 / 3.0

    def save(self, csv_path, sidecar_path=None) -> None:
        save_csv(csv_path, self.summary, include_weights=True)
        sidecar = Path(sidecar_path) if sidecar_path else Path(str(csv_path) + ".json")
        sidecar.write_text(json.dumps({"schema": 1, "epsilon": self.epsilon, "source_size": self.source_size}))

    @classmethod
    def load(cls, csv_path, sidecar_path=None) -> "Coreset":
        sidecar = Path(sidecar_path) if sidecar_path else Path(str(csv_path) + ".json")
        meta = json.loads(sidecar.read_text())
        return cls(load_csv(csv_path, weight_column=True), meta["epsilon"], int(meta["source_size"]))


def identity_coreset(P) -> Coreset:
    P = _as_weighted(P)
    return Coreset(P, 0.0, P.n)


def sample_coreset(P, m: int, seed: int = 0) -> Coreset:
    """Uniform sample of m points without replacement.

    Sampled weights are rescaled by W / W_sample so the total weight is kept
    exactly. No approximation guarantee is claimed.
    """
    P = _as_weighted(P)
    if not 1 <= m <= P.n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={P.n}")
    idx = np.random.default_rng(seed).permutation(P.n)[:m]
    w = P.weights[idx]
    sampled = math.fsum(w.tolist())
    total = P.total_weight
    new_w = w * (total / sampled) if sampled > 0 else np.full(m, total / m)
    return Coreset(WeightedDataset(Dataset(P.points[idx]), new_w), None, P.n)


def truncation_rank(r: int, delta: float) -> int:
    """ceil(r + r/delta) - 1, computed in exact rational arithmetic."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    q = Fraction(r) + Fraction(r) / Fraction(delta).limit_denominator(10 ** 12)
    return math.ceil(q) - 1


@dataclass(frozen=True)
class RelaxedCoreset:
    """S = Sigma^(r1) V^T of a local matrix plus the discarded spectral energy.

    ``rows`` has one row per singular value; rows past ``r1`` are zero.
    """

    rows: np.ndarray
    delta_term: float
    r1: int

    @property
    def nonzero_rows(self) -> np.ndarray:
        return self.rows[: self.r1]

    def as_dataset(self, weight: float = 1.0) -> WeightedDataset:
        pts = self.nonzero_rows
        return WeightedDataset(Dataset(pts), np.full(pts.shape[0], weight))


def relaxed_svd_coreset(P_i, r: int, delta: float) -> RelaxedCoreset:
    """Keep the top r1 = ceil(r + r/delta) - 1 singular directions of a local matrix.

    r1 is capped at min(rows, d). For every r-dimensional linear subspace L,
    cost(P_i, L) <= cost(S, L) + delta_term <= (1 + delta) cost(P_i, L).
    """
    M = np.asarray(P_i, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {M.shape}")
    _, S, Vt = svd(M)
    r1 = min(truncation_rank(r, delta), S.size)
    kept = S.copy()
    kept[r1:] = 0.0
    rows = kept[:, None] * Vt
    rows.setflags(write=False)
    return RelaxedCoreset(rows, math.fsum((S[r1:] ** 2).tolist()), r1)


def merge_coresets(parts, b: RecoveryVector) -> Coreset:
    """Union of survivor coresets with node i's weights scaled by b_i.

    ``parts`` is a list of (Coreset, node index). Repeated points stay as
    separate entries, which gives the same cost as summing their weights.
    """
    parts = sorted(parts, key=lambda cn: cn[1])
    if not parts:
        raise ValueError("nothing to merge")
    pts, ws = [], []
    eps, guaranteed = 0.0, True
    for cs, node in parts:
        if node not in b.survivors:
            raise KeyError(f"node {node} is not a survivor")
        pts.append(cs.summary.points)
        ws.append(cs.summary.weights * b.weight_of(node))
        if cs.epsilon is None:
            guaranteed = False
        else:
            eps = max(eps, cs.epsilon)
    merged = WeightedDataset(Dataset(np.concatenate(pts)), np.concatenate(ws))
    epsilon = 2.0 * (eps + b.delta_achieved) if guaranteed else None
    return Coreset(merged, epsilon, len(b.a))


def collapse_duplicates(S: WeightedDataset) -> WeightedDataset:
    """Merge identical points, summing their weights (first-occurrence order)."""
    uniq, first, inverse = np.unique(S.points, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    w = np.bincount(inverse.ravel(), weights=S.weights, minlength=uniq.shape[0])
    return WeightedDataset(Dataset(uniq[order]), w[order])
