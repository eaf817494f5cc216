"""Redundant data assignment, straggler draws, and recovery vectors.

A point j survives a straggler event when at least one surviving node holds
it. The recovery vector b reweights surviving nodes so every point is counted
between 1 and 1 + delta times.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

PROPERTY_TOL = 1e-9


class RecoveryError(ValueError):
    """No admissible recovery vector for the surviving nodes."""


class PointUnrecoverable(RecoveryError):
    def __init__(self, lost: Sequence[int]):
        self.lost = tuple(int(j) for j in lost)
        preview = ", ".join(map(str, self.lost[:10]))
        more = "..." if len(self.lost) > 10 else ""
        super().__init__(f"{len(self.lost)} point(s) held by no surviving node: [{preview}{more}]")


class DeltaExceeded(RecoveryError):
    def __init__(self, ratio: float, delta: float):
        self.ratio = ratio
        self.delta = delta
        super().__init__(f"column support ratio {ratio:.6g} exceeds 1 + delta = {1 + delta:.6g}")


def _derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class AssignmentMatrix:
    """Binary s x n matrix; row i marks the points stored on node i."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=bool)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"assignment matrix must be s x n with s, n >= 1; got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def s(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def node_lists(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.entries]

    @property
    def loads(self) -> list[int]:
        return [int(x) for x in self.entries.sum(axis=1)]

    def empty_columns(self) -> np.ndarray:
        return np.flatnonzero(~self.entries.any(axis=0))

    @classmethod
    def from_node_lists(cls, s: int, n: int, rows: Sequence[Sequence[int]]) -> "AssignmentMatrix":
        if len(rows) != s:
            raise ValueError(f"{len(rows)} node lists for s={s}")
        a = np.zeros((s, n), dtype=bool)
        for i, cols in enumerate(rows):
            a[i, np.asarray(cols, dtype=np.int64)] = True
        return cls(a)

    def to_json(self) -> str:
        return json.dumps({"s": self.s, "n": self.n, "rows": [c.tolist() for c in self.node_lists]})

    @classmethod
    def from_json(cls, text: str) -> "AssignmentMatrix":
        obj = json.loads(text)
        return cls.from_node_lists(obj["s"], obj["n"], obj["rows"])


@dataclass(frozen=True)
class StragglerModel:
    """How the straggling nodes are chosen.

    kind is "iid" (each node straggles with probability p_t), "fixed" (a
    uniformly random set of exactly t nodes), or "explicit" (the given nodes).
    """

    kind: str = "iid"
    p_t: float = 0.0
    t: int = 0
    nodes: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("iid", "fixed", "explicit"):
            raise ValueError(f"unknown straggler model {self.kind!r}")
        if not 0.0 <= self.p_t < 1.0:
            raise ValueError(f"p_t must lie in [0, 1), got {self.p_t}")
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")
        object.__setattr__(self, "nodes", tuple(sorted({int(i) for i in self.nodes})))

    @classmethod
    def random_iid(cls, p_t: float, seed: int = 0) -> "StragglerModel":
        return cls("iid", p_t=p_t, seed=seed)

    @classmethod
    def fixed_count(cls, t: int, seed: int = 0) -> "StragglerModel":
        return cls("fixed", t=t, seed=seed)

    @classmethod
    def explicit(cls, nodes: Iterable[int]) -> "StragglerModel":
        return cls("explicit", nodes=tuple(nodes))

    def reseeded(self, seed: int) -> "StragglerModel":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p_t": self.p_t, "t": self.t, "nodes": list(self.nodes), "seed": self.seed}

    @classmethod
    def from_dict(cls, obj: dict) -> "StragglerModel":
        return cls(obj.get("kind", "iid"), float(obj.get("p_t", 0.0)), int(obj.get("t", 0)),
                   tuple(obj.get("nodes", ())), int(obj.get("seed", 0)))


def draw_stragglers(model: StragglerModel, s: int) -> tuple[int, ...]:
    """Sorted straggler indices; at least one node always survives."""
    if model.kind == "explicit":
        if any(i < 0 or i >= s for i in model.nodes):
            raise ValueError(f"straggler index out of range for s={s}: {model.nodes}")
        if len(model.nodes) >= s:
            raise ValueError("explicit straggler set covers every node")
        return model.nodes
    rng = np.random.default_rng(model.seed)
    if model.kind == "fixed":
        if model.t >= s:
            raise ValueError(f"t={model.t} stragglers leaves no survivor among s={s} nodes")
        return tuple(sorted(int(i) for i in rng.choice(s, size=model.t, replace=False)))
    attempt = 0
    while True:
        mask = rng.random(s) < model.p_t
        if not mask.all():
            return tuple(int(i) for i in np.flatnonzero(mask))
        attempt += 1
        log.info("all %d nodes straggled (attempt %d); redrawing", s, attempt)


def survivors_of(stragglers: Iterable[int], s: int) -> tuple[int, ...]:
    gone = set(stragglers)
    return tuple(i for i in range(s) if i not in gone)


def _bernoulli(n: int, s: int, p_a: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random((s, n)) < p_a


def random_assignment(n: int, s: int, p_a: float, seed: int = 0) -> AssignmentMatrix:
    """Each entry is 1 independently with probability p_a."""
    if not 0.0 < p_a <= 1.0:
        raise ValueError(f"p_a must lie in (0, 1], got {p_a}")
    if n < 1 or s < 1:
        raise ValueError("need n >= 1 and s >= 1")
    return AssignmentMatrix(_bernoulli(n, s, p_a, seed))


def partition_assignment(n: int, s: int, seed: int = 0, mode: str = "random") -> AssignmentMatrix:
    """No redundancy: every point goes to exactly one node.

    ``random`` deals a seeded random permutation round-robin; ``contiguous``
    hands node i the i-th block of consecutive indices.
    """
    a = np.zeros((s, n), dtype=bool)
    if mode == "random":
        perm = np.random.default_rng(seed).permutation(n)
        a[np.arange(n) % s, perm] = True
    elif mode == "contiguous":
        a[(np.arange(n) * s) // n, np.arange(n)] = True
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return AssignmentMatrix(a)


def theorem_ell(delta: float, p_t: float, n: int) -> tuple[float, float]:
    """Expected per-point replication that makes the random ensemble resilient w.p. 1 - 1/n.

    Returns (ell, gamma); the caller uses p_a = min(ell / s, 1).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0.0 <= p_t < 1.0:
        raise ValueError("p_t must lie in [0, 1)")
    if n < 2:
        raise ValueError("n must be at least 2")
    gamma = delta / (2.0 + delta)
    ell = 6.0 * math.log(math.sqrt(2.0) * n) / (gamma ** 2 * (1.0 - p_t))
    return ell, gamma


def theorem_pa(delta: float, p_t: float, n: int, s: int) -> float:
    ell, _ = theorem_ell(delta, p_t, n)
    return min(ell / s, 1.0)


@dataclass(frozen=True)
class RecoveryVector:
    """Per-survivor weights b and the achieved column sums a = b^T A_R.

    ``lost`` is empty for a genuine recovery vector; best-effort recovery
    lists the points no survivor holds (their a_j is 0).
    """

    survivors: tuple
    b: np.ndarray
    a: np.ndarray
    delta_achieved: float
    lost: tuple = field(default=())

    def weight_of(self, node: int) -> float:
        try:
            return float(self.b[self.survivors.index(node)])
        except ValueError:
            raise KeyError(f"node {node} is not a survivor") from None

    def to_json(self) -> str:
        return json.dumps({"survivors": list(self.survivors), "b": self.b.tolist(),
                           "delta_achieved": self.delta_achieved})


def _canonical_survivors(survivors: Iterable[int], s: int) -> tuple[int, ...]:
    surv = tuple(sorted(int(i) for i in survivors))
    if not surv:
        raise ValueError("survivor set is empty")
    if len(set(surv)) != len(surv) or surv[0] < 0 or surv[-1] >= s:
        raise ValueError(f"survivors must be distinct node indices in [0, {s})")
    return surv


def column_support(A: AssignmentMatrix, survivors: Sequence[int]) -> np.ndarray:
    return A.entries[list(survivors)].sum(axis=0).astype(np.int64)


def recovery_vector(A: AssignmentMatrix, survivors: Iterable[int], delta: float) -> RecoveryVector:
    """Uniform recovery vector b_i = 1 / min_j m_j, where m_j counts survivors holding point j.

    Raises PointUnrecoverable if some m_j is 0 and DeltaExceeded if
    max m_j / min m_j > 1 + delta.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    surv = _canonical_survivors(survivors, A.s)
    m = column_support(A, surv)
    lost = np.flatnonzero(m == 0)
    if lost.size:
        raise PointUnrecoverable(lost)
    lo, hi = int(m.min()), int(m.max())
    if hi > (1.0 + delta) * lo:
        raise DeltaExceeded(hi / lo, delta)
    b = np.full(len(surv), 1.0 / lo)
    a = m / lo
    b.setflags(write=False)
    a.setflags(write=False)
    return RecoveryVector(surv, b, a, float(a.max()) - 1.0)


def best_effort_recovery(A: AssignmentMatrix, survivors: Iterable[int]) -> RecoveryVector:
    """Uniform weights 1 / min positive support, ignoring points no survivor holds."""
    surv = _canonical_survivors(survivors, A.s)
    m = column_support(A, surv)
    held = m > 0
    lo = int(m[held].min()) if held.any() else 1
    b = np.full(len(surv), 1.0 / lo)
    a = m / lo
    b.setflags(write=False)
    a.setflags(write=False)
    return RecoveryVector(surv, b, a, float(a.max()) - 1.0, tuple(int(j) for j in np.flatnonzero(~held)))


def verify_property(A: AssignmentMatrix, survivors: Sequence[int], delta: float, b) -> bool:
    """True iff b >= 0 and every coordinate of b^T A_R lies in [1, 1 + delta] (1e-9 slack)."""
    b = np.asarray(b, dtype=np.float64)
    survivors = list(survivors)
    if b.shape != (len(survivors),):
        raise ValueError(f"b has shape {b.shape}, expected ({len(survivors)},)")
    if np.any(b < 0):
        return False
    a = b @ A.entries[survivors].astype(np.float64)
    return bool(np.all(a >= 1.0 - PROPERTY_TOL) and np.all(a <= 1.0 + delta + PROPERTY_TOL))


def property_frequency(n: int, s: int, p_a: float, model: StragglerModel, delta: float,
                       trials: int, seed: int = 0) -> float:
    """Fraction of joint (A, stragglers) draws for which uniform recovery succeeds."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"p_a must lie in [0, 1], got {p_a}")
    ok = 0
    for trial in range(trials):
        A = AssignmentMatrix(_bernoulli(n, s, p_a, _derive_seed(seed, trial, 0)))
        stragglers = draw_stragglers(model.reseeded(_derive_seed(seed, trial, 1)), s)
        try:
            recovery_vector(A, survivors_of(stragglers, s), delta)
        except RecoveryError:
            continue
        ok += 1
    return ok / trials
