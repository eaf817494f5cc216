"""Coordinator / worker simulation of the three straggler-resilient pipelines.

Workers are simulated in-process. A straggler's result is simply never
aggregated; there is no timing model. Aggregation is a fold over surviving
nodes in ascending index order, so a run is a deterministic function of its
configuration.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .assignment import (
    AssignmentMatrix,
    RecoveryError,
    RecoveryVector,
    StragglerModel,
    _derive_seed,
    best_effort_recovery,
    draw_stragglers,
    partition_assignment,
    random_assignment,
    recovery_vector,
    survivors_of,
    theorem_pa,
)
from .core import CenterSet, CostKind, Dataset, SubspaceSet, WeightedDataset, assign, cost_points, cost_subspaces, load_csv
from .coresets import identity_coreset, merge_coresets, relaxed_svd_coreset, sample_coreset
from .lemmas import (
    check_center_summary,
    check_coreset,
    check_relaxed_merge,
    check_weighted_cover,
    random_centers,
    random_subspaces,
)
from .solvers import SolverOptions, kmedian_exact, kmedian_heuristic, r_pca, subspace_cluster

__all__ = ["RunConfig", "RunResult", "SeedBlock", "run", "run_kmedian", "run_subspace", "run_pca",
           "draw_stragglers", "GuaranteeError"]

log = logging.getLogger(__name__)

ALGORITHMS = ("kmedian", "subspace", "pca")
SCHEMA = 1


class GuaranteeError(ValueError):
    """A configuration asks for a proven bound with a construction that has none."""


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, seeds included.

    ``p_a`` set explicitly wins; otherwise the replication probability comes
    from ``theorem_pa(delta, p_t, n, s)`` where p_t defaults to the straggler
    model's own p_t.
    """

    algorithm: str = "kmedian"
    s: int = 10
    k: int = 15
    r: int = 1
    delta: float = 1.0
    p_a: float | None = None
    p_t: float | None = None
    stragglers: StragglerModel = field(default_factory=StragglerModel)
    seed: int = 0
    cost_kind: CostKind = CostKind.KMEDIAN
    baseline: bool = False
    baseline_partition: str = "random"
    recovery: str = "strict"
    coreset: str = "identity"
    coreset_size: int = 0
    require_guarantee: bool = True
    local_solver: str = "heuristic"
    coordinator_solver: str = "heuristic"
    n_init: int = 1
    verify_lemmas: bool = False
    probes: int = 20
    centralized: bool = False
    data: str | None = None
    weight_column: bool = False
    max_retries: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.s < 1 or self.k < 1 or self.r < 0:
            raise ValueError("need s >= 1, k >= 1, r >= 0")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.p_a is not None and not 0.0 < self.p_a <= 1.0:
            raise ValueError(f"p_a must lie in (0, 1], got {self.p_a}")
        if self.recovery not in ("strict", "best_effort"):
            raise ValueError(f"recovery must be 'strict' or 'best_effort', got {self.recovery!r}")
        if self.coreset not in ("identity", "sample"):
            raise ValueError(f"coreset must be 'identity' or 'sample', got {self.coreset!r}")
        for name in ("local_solver", "coordinator_solver"):
            if getattr(self, name) not in ("heuristic", "exact"):
                raise ValueError(f"{name} must be 'heuristic' or 'exact'")
        if isinstance(self.cost_kind, str):
            object.__setattr__(self, "cost_kind", CostKind(self.cost_kind))
        if isinstance(self.stragglers, dict):
            object.__setattr__(self, "stragglers", StragglerModel.from_dict(self.stragglers))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["stragglers"] = self.stragglers.to_dict()
        d["cost_kind"] = self.cost_kind.value
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known - {"schema"}
        if unknown:
            raise ValueError(f"unknown RunConfig fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in obj.items() if k in known})

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SeedBlock:
    """Per-phase seeds derived from the master seed."""

    master: int
    assignment: int
    stragglers: int
    coordinator: int
    probes: int
    centralized: int
    nodes: tuple

    @classmethod
    def derive(cls, seed: int, s: int) -> "SeedBlock":
        return cls(seed, _derive_seed(seed, 0), _derive_seed(seed, 1), _derive_seed(seed, 3),
                   _derive_seed(seed, 4), _derive_seed(seed, 5),
                   tuple(_derive_seed(seed, 2, i) for i in range(s)))

    def assignment_attempt(self, attempt: int) -> int:
        return self.assignment if attempt == 0 else _derive_seed(self.assignment, attempt)


@dataclass
class RunResult:
    algorithm: str
    model: CenterSet | SubspaceSet
    cost: float
    stragglers: tuple
    recovery: RecoveryVector
    loads: list
    retries: int
    p_a: float
    seeds: SeedBlock
    centralized_cost: float | None = None
    summary_size: int = 0
    delta_term: float | None = None
    timings: dict = field(default_factory=dict)
    lemma_checks: dict | None = None

    @property
    def lost_points(self) -> int:
        return len(self.recovery.lost)

    def to_dict(self, include_timings: bool = False) -> dict:
        if isinstance(self.model, CenterSet):
            model = {"centers": self.model.centers.tolist()}
        else:
            model = {"bases": [b.tolist() for b in self.model.bases]}
        d = {
            "schema": SCHEMA,
            "algorithm": self.algorithm,
            "cost": self.cost,
            "centralized_cost": self.centralized_cost,
            "stragglers": list(self.stragglers),
            "survivors": list(self.recovery.survivors),
            "b": self.recovery.b.tolist(),
            "delta_achieved": self.recovery.delta_achieved,
            "lost_points": self.lost_points,
            "loads": list(self.loads),
            "retries": self.retries,
            "p_a": self.p_a,
            "summary_size": self.summary_size,
            "delta_term": self.delta_term,
            "seed_block": {**asdict(self.seeds), "nodes": list(self.seeds.nodes)},
            "model": model,
        }
        if self.lemma_checks is not None:
            d["lemma_checks"] = self.lemma_checks
        if include_timings:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True)


def load_dataset(config: RunConfig) -> WeightedDataset:
    if config.data is None:
        raise ValueError("no dataset given: set RunConfig.data or pass data=")
    return load_csv(config.data, weight_column=config.weight_column)


def _build_assignment(config: RunConfig, n: int, seeds: SeedBlock) -> tuple[AssignmentMatrix, float, int]:
    if config.baseline:
        return partition_assignment(n, config.s, seeds.assignment, config.baseline_partition), 1.0 / config.s, 0
    if config.p_a is not None:
        p_a = config.p_a
    else:
        p_t = config.p_t if config.p_t is not None else config.stragglers.p_t
        p_a = theorem_pa(config.delta, p_t, max(n, 2), config.s)
    A = random_assignment(n, config.s, p_a, seeds.assignment)
    retries = 0
    while A.empty_columns().size and retries < config.max_retries:
        retries += 1
        log.info("assignment has %d empty column(s); resampling (retry %d)", A.empty_columns().size, retries)
        A = random_assignment(n, config.s, p_a, seeds.assignment_attempt(retries))
    if A.empty_columns().size:
        (log.info if config.recovery == "best_effort" else log.warning)("assignment still has %d empty column(s) after %d retries", A.empty_columns().size, retries)
    return A, p_a, retries


def _recover(config: RunConfig, A: AssignmentMatrix, survivors) -> RecoveryVector:
    # a partition has column supports in {0, 1}, so best effort gives b = all ones
    if config.baseline or config.recovery == "best_effort":
        rv = best_effort_recovery(A, survivors)
        if rv.lost:
            log.info("best-effort recovery: %d point(s) held by no survivor are dropped", len(rv.lost))
        return rv
    try:
        return recovery_vector(A, survivors, config.delta)
    except RecoveryError as exc:
        raise RecoveryError(f"recovery failed for survivors {list(survivors)} "
                            f"(loads {A.loads}): {exc}") from exc


def _fan_out(fn: Callable, items, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


class _Setup:
    """Assignment, stragglers, and recovery shared by all pipelines."""

    def __init__(self, config: RunConfig, P: WeightedDataset, assignment: AssignmentMatrix | None = None):
        t0 = time.perf_counter()
        self.seeds = SeedBlock.derive(config.seed, config.s)
        if assignment is not None:
            if assignment.shape != (config.s, P.n):
                raise ValueError(f"assignment is {assignment.shape}, expected {(config.s, P.n)}")
            self.A, self.retries = assignment, 0
            self.p_a = float(assignment.entries.mean())
        else:
            self.A, self.p_a, self.retries = _build_assignment(config, P.n, self.seeds)
        model = config.stragglers
        if model.kind != "explicit":
            model = model.reseeded(_derive_seed(self.seeds.stragglers, model.seed))
        self.stragglers = draw_stragglers(model, config.s)
        self.survivors = survivors_of(self.stragglers, config.s)
        self.recovery = _recover(config, self.A, self.survivors)
        self.node_lists = self.A.node_lists
        self.timings = {"assignment": time.perf_counter() - t0}

    def local_data(self, P: WeightedDataset, i: int) -> WeightedDataset | None:
        idx = self.node_lists[i]
        return P.subset(idx) if idx.size else None


def _kmedian_solve(P: WeightedDataset, k: int, solver: str, seed: int, n_init: int) -> CenterSet:
    k = min(k, P.n)
    if solver == "exact":
        return kmedian_exact(P, k)[0]
    return kmedian_heuristic(P, k, seed, SolverOptions(n_init=n_init))[0]


def run_kmedian(config: RunConfig, data: WeightedDataset | None = None,
                assignment: AssignmentMatrix | None = None) -> RunResult:
    """Each surviving node sends k local centers weighted by cluster mass; the
    coordinator clusters the b-reweighted union."""
    if config.algorithm != "kmedian":
        raise ValueError("run_kmedian needs algorithm='kmedian'")
    if config.cost_kind is not CostKind.KMEDIAN:
        raise ValueError("the k-median pipeline evaluates the k-median cost only")
    P = data if data is not None else load_dataset(config)
    st = _Setup(config, P, assignment)

    def local(i):
        Pi = st.local_data(P, i)
        if Pi is None:
            return None
        Yi = _kmedian_solve(Pi, config.k, config.local_solver, st.seeds.nodes[i], config.n_init)
        labels, dist = assign(Pi.points, Yi.centers)
        wi = np.bincount(labels, weights=Pi.weights, minlength=Yi.k)
        residual = float(Pi.weights @ dist)
        return Yi.centers, wi, residual

    t0 = time.perf_counter()
    outputs = _fan_out(local, st.survivors, config.workers)
    st.timings["local"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pts, ws, residual = [], [], 0.0
    for i, out in zip(st.survivors, outputs):
        if out is None:
            continue
        bi = st.recovery.weight_of(i)
        keep = out[1] > 0
        pts.append(out[0][keep])
        ws.append(bi * out[1][keep])
        residual += bi * out[2]
    if not pts:
        raise RecoveryError("no surviving node holds any data")
    Y = WeightedDataset(Dataset(np.concatenate(pts)), np.concatenate(ws))
    C = _kmedian_solve(Y, config.k, config.coordinator_solver, st.seeds.coordinator, config.n_init)
    st.timings["coordinator"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = RunResult("kmedian", C, cost_points(P, C), st.stragglers, st.recovery, st.A.loads, st.retries,
                       st.p_a, st.seeds, summary_size=Y.n)
    if config.centralized:
        result.centralized_cost = _kmedian_centralized(P, config, st.seeds)
    if config.verify_lemmas:
        rng = np.random.default_rng(st.seeds.probes)
        probes = [random_centers(P, config.k, rng) for _ in range(config.probes)]
        reweighted = WeightedDataset(P.base, P.weights * (0.5 + rng.random(P.n)))
        result.lemma_checks = {
            "weighted_cover": check_weighted_cover(reweighted, st.node_lists, st.recovery.survivors,
                                                   st.recovery.b, st.recovery.delta_achieved, probes).to_dict(),
            "center_summary": check_center_summary(P, Y, residual, st.recovery.delta_achieved, probes).to_dict(),
        }
    st.timings["evaluate"] = time.perf_counter() - t0
    result.timings = st.timings
    return result


def _kmedian_centralized(P, config, seeds):
    return kmedian_heuristic(P, min(config.k, P.n), seeds.centralized, SolverOptions(n_init=config.n_init))[1]


def run_subspace(config: RunConfig, data: WeightedDataset | None = None,
                 assignment: AssignmentMatrix | None = None) -> RunResult:
    """Nodes send coresets of their data; the coordinator merges them with
    b-scaled weights and fits k subspaces to the merged set."""
    if config.algorithm != "subspace":
        raise ValueError("run_subspace needs algorithm='subspace'")
    if config.coreset == "sample" and config.require_guarantee:
        raise GuaranteeError("sample coresets carry no guarantee; set require_guarantee=False to use them")
    P = data if data is not None else load_dataset(config)
    st = _Setup(config, P, assignment)

    def local(i):
        Pi = st.local_data(P, i)
        if Pi is None:
            return None
        if config.coreset == "identity":
            return identity_coreset(Pi)
        return sample_coreset(Pi, min(max(config.coreset_size, 1), Pi.n), st.seeds.nodes[i])

    t0 = time.perf_counter()
    parts = [(cs, i) for i, cs in zip(st.survivors, _fan_out(local, st.survivors, config.workers)) if cs is not None]
    st.timings["local"] = time.perf_counter() - t0
    if not parts:
        raise RecoveryError("no surviving node holds any data")

    t0 = time.perf_counter()
    merged = merge_coresets(parts, st.recovery)
    L, _ = subspace_cluster(merged.summary, config.r, config.k, st.seeds.coordinator)
    st.timings["coordinator"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = RunResult("subspace", L, cost_subspaces(P, L), st.stragglers, st.recovery, st.A.loads, st.retries,
                       st.p_a, st.seeds, summary_size=merged.summary.n)
    if config.centralized:
        result.centralized_cost = subspace_cluster(P, config.r, config.k, st.seeds.centralized)[1]
    if config.verify_lemmas and merged.epsilon is not None:
        rng = np.random.default_rng(st.seeds.probes)
        probes = [random_subspaces(P.dim, config.r, config.k, rng) for _ in range(config.probes)]
        eps = max(cs.epsilon for cs, _ in parts)
        result.lemma_checks = {
            "merged_coreset": check_coreset(P, merged.summary, eps, st.recovery.delta_achieved, probes,
                                            subspaces=True).to_dict(),
        }
    st.timings["evaluate"] = time.perf_counter() - t0
    result.timings = st.timings
    return result


def run_pca(config: RunConfig, data: WeightedDataset | None = None,
            assignment: AssignmentMatrix | None = None) -> RunResult:
    """Nodes send truncated-SVD summaries; the coordinator stacks them with
    weight b_i and returns the top-r right singular subspace."""
    if config.algorithm != "pca":
        raise ValueError("run_pca needs algorithm='pca'")
    P = data if data is not None else load_dataset(config)
    if not 1 <= config.r <= P.dim:
        raise ValueError(f"need 1 <= r <= d, got r={config.r}, d={P.dim}")
    st = _Setup(config, P, assignment)

    def local(i):
        Pi = st.local_data(P, i)
        if Pi is None:
            return None
        return relaxed_svd_coreset(np.sqrt(Pi.weights)[:, None] * Pi.points, config.r, config.delta)

    t0 = time.perf_counter()
    outputs = _fan_out(local, st.survivors, config.workers)
    st.timings["local"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pts, ws, Delta = [], [], 0.0
    for i, rc in zip(st.survivors, outputs):
        if rc is None:
            continue
        bi = st.recovery.weight_of(i)
        pts.append(rc.nonzero_rows)
        ws.append(np.full(rc.r1, bi))
        Delta += bi * rc.delta_term
    if not pts:
        raise RecoveryError("no surviving node holds any data")
    Y = WeightedDataset(Dataset(np.concatenate(pts)), np.concatenate(ws))
    L, _ = r_pca(Y, config.r)
    st.timings["coordinator"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = RunResult("pca", L, cost_subspaces(P, L), st.stragglers, st.recovery, st.A.loads, st.retries,
                       st.p_a, st.seeds, summary_size=Y.n, delta_term=Delta)
    if config.centralized:
        result.centralized_cost = r_pca(P, config.r)[1]
    if config.verify_lemmas:
        rng = np.random.default_rng(st.seeds.probes)
        probes = [random_subspaces(P.dim, config.r, 1, rng) for _ in range(config.probes)]
        result.lemma_checks = {
            "relaxed_merge": check_relaxed_merge(P, Y, Delta, config.delta, probes).to_dict(),
        }
    st.timings["evaluate"] = time.perf_counter() - t0
    result.timings = st.timings
    return result


def run(config: RunConfig, data: WeightedDataset | None = None,
        assignment: AssignmentMatrix | None = None) -> RunResult:
    """Dispatch on ``config.algorithm``; ``assignment`` overrides the generated matrix."""
    fn = {"kmedian": run_kmedian, "subspace": run_subspace, "pca": run_pca}[config.algorithm]
    return fn(config, data, assignment)
