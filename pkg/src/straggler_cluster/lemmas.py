"""Two-sided cost bounds evaluated on random probe models.

Each check returns a ``Sandwich`` recording the worst observed ratios
against the lower and upper bound over all probes.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import CenterSet, CostKind, SubspaceSet, WeightedDataset, cost_points, cost_subspaces


@dataclass
class Sandwich:
    """Tracks lower <= middle <= upper over probes, with relative slack ``tol``.

    Slack is relative to max(|lower|, |upper|, floor); a positive ``floor``
    keeps near-zero costs from turning rounding noise into violations.
    """

    name: str
    tol: float
    floor: float = 0.0
    probes: int = 0
    violations: int = 0
    worst_lower_margin: float = np.inf
    worst_upper_ratio: float = 0.0

    def add(self, lower: float, middle: float, upper: float) -> None:
        self.probes += 1
        scale = max(abs(lower), abs(upper), self.floor, 1e-300)
        if middle < lower - self.tol * scale or middle > upper + self.tol * scale:
            self.violations += 1
        self.worst_lower_margin = min(self.worst_lower_margin, (middle - lower) / scale)
        if upper > 0:
            self.worst_upper_ratio = max(self.worst_upper_ratio, middle / upper)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["worst_lower_margin"] = float(d["worst_lower_margin"]) if self.probes else None
        return d


def energy_floor(P: WeightedDataset) -> float:
    """Scale floor for squared-distance costs: a small fraction of sum_j w_j |p_j|^2."""
    return 1e-4 * float(P.weights @ np.einsum("nd,nd->n", P.points, P.points))


def _with_floor(sw: Sandwich, floor: float) -> Sandwich:
    sw.floor = max(sw.floor, floor)
    return sw


def random_centers(P: WeightedDataset, k: int, rng: np.random.Generator) -> CenterSet:
    lo, hi = P.points.min(axis=0), P.points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return CenterSet(lo - 0.25 * span + 1.5 * span * rng.random((k, P.dim)))


def random_subspaces(d: int, r: int, k: int, rng: np.random.Generator) -> SubspaceSet:
    return SubspaceSet(tuple(np.linalg.qr(rng.standard_normal((d, r)))[0] for _ in range(k)))


def node_cost_sum(P: WeightedDataset, node_lists, survivors, b, C, kind=CostKind.KMEDIAN) -> float:
    return sum(float(bi) * cost_points(P.subset(node_lists[i]), C, kind)
               for i, bi in zip(survivors, b) if len(node_lists[i]))


def check_weighted_cover(P: WeightedDataset, node_lists, survivors, b, delta: float, probes, tol=1e-9,
                         kind=CostKind.KMEDIAN, sandwich=None) -> Sandwich:
    """cost(P, C, w) <= sum_i b_i cost(P_i, C, w) <= (1 + delta) cost(P, C, w)."""
    sw = sandwich or Sandwich("weighted_cover", tol)
    for C in probes:
        full = cost_points(P, C, kind)
        sw.add(full, node_cost_sum(P, node_lists, survivors, b, C, kind), (1.0 + delta) * full)
    return sw


def check_center_summary(P: WeightedDataset, Y: WeightedDataset, local_residual: float, delta: float,
                         probes, tol=1e-9, sandwich=None) -> Sandwich:
    """cost(P, C) - sum_i b_i cost(P_i, Y_i) <= cost(Y, C, w) <= 2(1 + delta) cost(P, C)."""
    sw = sandwich or Sandwich("center_summary", tol)
    for C in probes:
        full = cost_points(P, C)
        sw.add(full - local_residual, cost_points(Y, C), 2.0 * (1.0 + delta) * full)
    return sw


def check_coreset(P: WeightedDataset, S: WeightedDataset, epsilon: float, delta: float, probes,
                  tol=1e-9, subspaces=False, kind=CostKind.KMEDIAN, sandwich=None) -> Sandwich:
    """(1 - 2eps - 2delta) cost(P, .) <= cost(S, ., w) <= (1 + 2eps + 2delta) cost(P, .)."""
    sw = sandwich or Sandwich("merged_coreset", tol)
    if subspaces:
        _with_floor(sw, energy_floor(P))
    f = 2.0 * (epsilon + delta)
    for M in probes:
        full = cost_subspaces(P, M) if subspaces else cost_points(P, M, kind)
        mid = cost_subspaces(S, M) if subspaces else cost_points(S, M, kind)
        sw.add((1.0 - f) * full, mid, (1.0 + f) * full)
    return sw


def check_relaxed(P_rows: np.ndarray, rc, delta: float, probes, tol=1e-8, sandwich=None) -> Sandwich:
    """cost(P_i, L) <= cost(S_i, L) + Delta_i <= (1 + delta) cost(P_i, L)."""
    P = WeightedDataset.from_points(P_rows)
    sw = _with_floor(sandwich or Sandwich("relaxed_coreset", tol), energy_floor(P))
    S = rc.as_dataset()
    for L in probes:
        full = cost_subspaces(P, L)
        sw.add(full, cost_subspaces(S, L) + rc.delta_term, (1.0 + delta) * full)
    return sw


def check_relaxed_merge(P: WeightedDataset, Y: WeightedDataset, Delta: float, delta: float, probes,
                        tol=1e-8, sandwich=None) -> Sandwich:
    """cost(P, L) <= cost(Y, L, w) + Delta <= (1 + 4 delta) cost(P, L)."""
    sw = _with_floor(sandwich or Sandwich("relaxed_merge", tol), energy_floor(P))
    for L in probes:
        full = cost_subspaces(P, L)
        sw.add(full, cost_subspaces(Y, L) + Delta, (1.0 + 4.0 * delta) * full)
    return sw
