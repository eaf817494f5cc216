"""Randomized property suites for every approximation bound.

Each suite returns a JSON-ready report with ``passed`` and the worst observed
margin against its bound. The CLI ``verify`` command and the acceptance tests
both drive these.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .assignment import (
    AssignmentMatrix,
    RecoveryError,
    StragglerModel,
    column_support,
    property_frequency,
    random_assignment,
    recovery_vector,
    survivors_of,
    draw_stragglers,
    theorem_ell,
    verify_property,
)
from .core import CostKind, WeightedDataset, assign, cost_points
from .coresets import collapse_duplicates, identity_coreset, merge_coresets, relaxed_svd_coreset
from .lemmas import (
    Sandwich,
    check_center_summary,
    check_coreset,
    check_relaxed,
    check_weighted_cover,
    random_centers,
    random_subspaces,
)
from .pipeline import RunConfig, run_kmedian, run_pca
from .solvers import jacobi_svd, kmedian_exact

SUITES: dict[str, Callable[..., dict]] = {}


def suite(name):
    def register(fn):
        SUITES[name] = fn
        return fn
    return register


def _random_weighted(rng, n, d, weighted=True) -> WeightedDataset:
    pts = rng.standard_normal((n, d)) * rng.uniform(0.5, 5.0, size=d) + rng.uniform(-5, 5, size=d)
    w = rng.uniform(0.1, 3.0, size=n) if weighted else np.ones(n)
    return WeightedDataset.from_points(pts, w)


def planted_assignment(rng, n: int, s: int, delta: float, survivors=None, min_support: int = 1):
    """A matrix whose survivor column supports stay within a factor 1 + delta.

    Returns (A, survivors). Straggler rows are filled with fair coin flips.
    """
    if survivors is None:
        size = int(rng.integers(max(1, min_support), s + 1))
        survivors = np.sort(rng.choice(s, size=size, replace=False))
    survivors = np.asarray(survivors)
    R = len(survivors)
    lo = int(rng.integers(min_support, R + 1))
    hi = min(R, int(math.floor((1.0 + delta) * lo + 1e-12)))
    A = rng.random((s, n)) < 0.5
    A[survivors] = False
    for j in range(n):
        m = int(rng.integers(lo, hi + 1))
        A[rng.choice(survivors, size=m, replace=False), j] = True
    return AssignmentMatrix(A), tuple(int(i) for i in survivors)


def valid_instance(rng, n, s, delta, p_t=0.2, attempts=30, min_support=1):
    """Random (A, survivors) admitting recovery at delta.

    Tries i.i.d. Bernoulli draws with random p_a first and falls back to a
    planted matrix; returns (A, survivors, recovery, planted).
    """
    for _ in range(attempts):
        p_a = rng.uniform(0.4, 1.0)
        A = random_assignment(n, s, p_a, int(rng.integers(2 ** 63)))
        surv = survivors_of(draw_stragglers(StragglerModel.random_iid(p_t, int(rng.integers(2 ** 63))), s), s)
        if column_support(A, surv).min() < min_support:
            continue
        try:
            return A, surv, recovery_vector(A, surv, delta), False
        except RecoveryError:
            continue
    A, surv = planted_assignment(rng, n, s, delta, min_support=min_support)
    return A, surv, recovery_vector(A, surv, delta), True


def _report(name, sandwiches, **extra) -> dict:
    sws = [sw.to_dict() for sw in sandwiches]
    return {"suite": name, "passed": all(sw["passed"] for sw in sws), "checks": sws, **extra}


@suite("property")
def verify_property_suite(instances: int = 200, seed: int = 0, **_) -> dict:
    """Uniform recovery agrees with a column-count oracle and round-trips through verify_property."""
    rng = np.random.default_rng(seed)
    mismatches = roundtrip_fail = successes = 0
    for _ in range(instances):
        n, s = int(rng.integers(1, 40)), int(rng.integers(1, 10))
        delta = float(rng.choice([0.0, 0.2, 0.5, 1.0, 2.0]))
        A = AssignmentMatrix(rng.random((s, n)) < rng.uniform(0.1, 1.0))
        surv = tuple(sorted(rng.choice(s, size=int(rng.integers(1, s + 1)), replace=False).tolist()))
        counts = [sum(int(A.entries[i, j]) for i in surv) for j in range(n)]
        expected = min(counts) >= 1 and max(counts) <= (1 + delta) * min(counts)
        try:
            rv = recovery_vector(A, surv, delta)
            got = True
            if not verify_property(A, rv.survivors, delta, rv.b):
                roundtrip_fail += 1
        except RecoveryError:
            got = False
        successes += got
        mismatches += got != expected
    return {"suite": "property", "passed": mismatches == 0 and roundtrip_fail == 0, "instances": instances,
            "successes": successes, "oracle_mismatches": mismatches, "roundtrip_failures": roundtrip_fail}


@suite("lemma2")
def verify_lemma2(instances: int = 100, seed: int = 7, probes: int = 20, tol: float = 1e-9, **_) -> dict:
    """cost(P,C,w) <= sum b_i cost(P_i,C,w) <= (1+delta) cost(P,C,w)."""
    rng = np.random.default_rng(seed)
    sw = Sandwich("lemma2", tol)
    planted = 0
    for inst in range(instances):
        n, d, s = int(rng.integers(20, 101)), int(rng.integers(2, 11)), int(rng.integers(4, 13))
        delta = float(rng.choice([0.2, 0.5, 1.0]))
        P = _random_weighted(rng, n, d)
        A, surv, rv, was_planted = valid_instance(rng, n, s, delta)
        planted += was_planted
        kind = CostKind.KMEDIAN if inst % 2 == 0 else CostKind.KMEANS
        cs = [random_centers(P, int(rng.integers(1, 6)), rng) for _ in range(probes)]
        check_weighted_cover(P, A.node_lists, rv.survivors, rv.b, delta, cs, tol, kind, sandwich=sw)
    return _report("lemma2", [sw], instances=instances, planted_instances=planted)


@suite("lemma3")
def verify_lemma3(instances: int = 50, seed: int = 3, probes: int = 20, tol: float = 1e-9, k: int = 2, **_) -> dict:
    """Local exact k-median summaries: lower and upper cost bounds of the weighted center union."""
    rng = np.random.default_rng(seed)
    sw = Sandwich("lemma3", tol)
    for _ in range(instances):
        n, s = int(rng.integers(6, 17)), int(rng.integers(3, 7))
        delta = float(rng.choice([0.5, 1.0, 2.0]))
        P = _random_weighted(rng, n, 2, weighted=False)
        A, surv, rv, _ = valid_instance(rng, n, s, delta)
        pts, ws, residual = [], [], 0.0
        for i, bi in zip(rv.survivors, rv.b):
            Pi = P.subset(A.node_lists[i])
            if Pi.n == 0:
                continue
            Yi, ci = kmedian_exact(Pi, min(k, Pi.n))
            labels, _ = assign(Pi.points, Yi.centers)
            pts.append(Yi.centers)
            ws.append(bi * np.bincount(labels, weights=Pi.weights, minlength=Yi.k))
            residual += bi * ci
        Y = WeightedDataset.from_points(np.concatenate(pts), np.concatenate(ws))
        cs = [random_centers(P, k, rng) for _ in range(probes)]
        check_center_summary(P, Y, residual, rv.delta_achieved, cs, tol, sandwich=sw)
    return _report("lemma3", [sw], instances=instances)


@suite("lemma5")
def verify_lemma5(instances: int = 100, seed: int = 5, probes: int = 20, tol: float = 1e-9, **_) -> dict:
    """Identity coresets merged with b: (1 - 2 delta) cost <= merged cost <= (1 + 2 delta) cost."""
    rng = np.random.default_rng(seed)
    sw_pts = Sandwich("lemma5_kmedian", tol)
    sw_sub = Sandwich("lemma5_subspaces", tol)
    for _ in range(instances):
        n, d, s = int(rng.integers(10, 61)), int(rng.integers(2, 8)), int(rng.integers(2, 10))
        delta = float(rng.choice([0.2, 0.5, 1.0]))
        P = _random_weighted(rng, n, d)
        A, surv, rv, _ = valid_instance(rng, n, s, delta)
        parts = [(identity_coreset(P.subset(A.node_lists[i])), i) for i in rv.survivors if A.node_lists[i].size]
        merged = merge_coresets(parts, rv)
        cs = [random_centers(P, int(rng.integers(1, 5)), rng) for _ in range(probes)]
        check_coreset(P, merged.summary, 0.0, delta, cs, tol, sandwich=sw_pts)
        r = int(rng.integers(1, d))
        ls = [random_subspaces(d, r, int(rng.integers(1, 4)), rng) for _ in range(probes)]
        check_coreset(P, merged.summary, 0.0, delta, ls, tol, subspaces=True, sandwich=sw_sub)
    return _report("lemma5", [sw_pts, sw_sub], instances=instances)


def _spectral_matrix(rng, m, d):
    decay = rng.uniform(0.3, 0.95)
    scales = decay ** np.arange(d) * rng.uniform(1.0, 10.0)
    return rng.standard_normal((m, d)) * scales @ np.linalg.qr(rng.standard_normal((d, d)))[0]


@suite("lemma6")
def verify_lemma6(instances: int = 100, seed: int = 6, probes: int = 100, tol: float = 1e-8, **_) -> dict:
    """Relaxed SVD coreset: cost(P,L) <= cost(S,L) + Delta <= (1 + delta) cost(P,L)."""
    rng = np.random.default_rng(seed)
    sw = Sandwich("lemma6", tol)
    truncated = 0
    for _ in range(instances):
        m, d = int(rng.integers(5, 61)), int(rng.integers(3, 31))
        r = int(rng.integers(1, min(5, d - 1) + 1))
        delta = float(rng.choice([0.1, 0.2, 0.5, 1.0, 2.0]))
        M = _spectral_matrix(rng, m, d)
        rc = relaxed_svd_coreset(M, r, delta)
        truncated += rc.delta_term > 0
        ls = [random_subspaces(d, r, 1, rng) for _ in range(probes)]
        check_relaxed(M, rc, delta, ls, tol, sandwich=sw)
    return _report("lemma6", [sw], instances=instances, truncated_instances=int(truncated))


def _pca_instance(rng, s_range=(3, 9), deltas=(0.1, 0.2, 0.5), max_n=400, max_d=25, max_r=5):
    n, d = int(rng.integers(20, max_n + 1)), int(rng.integers(3, max_d + 1))
    r = int(rng.integers(1, min(max_r, d - 1) + 1))
    s = int(rng.integers(*s_range))
    delta = float(rng.choice(deltas))
    P = WeightedDataset.from_points(_spectral_matrix(rng, n, d))
    p_t = float(rng.uniform(0.0, 0.3))
    return P, r, s, delta, p_t


def _strict_pca_run(rng, P, r, s, delta, p_t, probes=0):
    A, surv, _, _ = valid_instance(rng, P.n, s, delta, p_t)
    cfg = RunConfig(algorithm="pca", s=s, r=r, delta=delta, seed=int(rng.integers(2 ** 63)),
                    stragglers=StragglerModel.explicit(sorted(set(range(s)) - set(surv))),
                    verify_lemmas=probes > 0, probes=probes)
    return run_pca(cfg, P, assignment=A)


@suite("lemma7")
def verify_lemma7(instances: int = 30, seed: int = 8, probes: int = 20, tol: float = 1e-8, **_) -> dict:
    """Merged relaxed coresets: cost(P,L) <= cost(Y,L,w) + Delta <= (1 + 4 delta) cost(P,L)."""
    rng = np.random.default_rng(seed)
    sw = Sandwich("lemma7", tol)
    for _ in range(instances):
        P, r, s, delta, p_t = _pca_instance(rng, max_n=200)
        res = _strict_pca_run(rng, P, r, s, delta, p_t, probes=probes)
        got = res.lemma_checks["relaxed_merge"]
        sw.probes += got["probes"]
        sw.violations += got["violations"]
        sw.worst_lower_margin = min(sw.worst_lower_margin, got["worst_lower_margin"])
        sw.worst_upper_ratio = max(sw.worst_upper_ratio, got["worst_upper_ratio"])
    return _report("lemma7", [sw], instances=instances)


@suite("thm1")
def verify_thm1(instances: int = 50, seed: int = 1, k: int = 2, **_) -> dict:
    """Exact solution on a merged identity coreset is within (1 + 3 eps) of optimal."""
    rng = np.random.default_rng(seed)
    worst, violations, eps_max = 0.0, 0, 0.0
    for _ in range(instances):
        n, s = int(rng.integers(5, 13)), int(rng.integers(10, 14))
        P = _random_weighted(rng, n, 2)
        # supports in {m, m + 1} with m >= 7 keep delta below 1/6, hence eps < 1/3
        A, surv = planted_assignment(rng, n, s, 1.0 / 7.0, survivors=np.sort(rng.choice(s, size=s - int(rng.integers(0, 3)), replace=False)),
                                     min_support=7)
        rv = recovery_vector(A, surv, 1.0 / 7.0)
        parts = [(identity_coreset(P.subset(A.node_lists[i])), i) for i in rv.survivors if A.node_lists[i].size]
        merged = merge_coresets(parts, rv)
        eps = merged.epsilon
        eps_max = max(eps_max, eps)
        Cs, _ = kmedian_exact(collapse_duplicates(merged.summary), k)
        _, opt = kmedian_exact(P, k)
        got = cost_points(P, Cs)
        ratio = got / opt if opt > 0 else (1.0 if got == 0 else math.inf)
        worst = max(worst, ratio)
        if got > (1.0 + 3.0 * eps) * opt * (1 + 1e-12) + 1e-12:
            violations += 1
    return {"suite": "thm1", "passed": violations == 0 and eps_max < 1 / 3, "instances": instances,
            "violations": violations, "worst_ratio": worst, "max_epsilon": eps_max}


@suite("thm4")
def verify_thm4(instances: int = 50, seed: int = 4, k: int = 2, **_) -> dict:
    """End-to-end k-median with exact discrete solvers: cost <= 6(1 + delta) OPT_discrete."""
    rng = np.random.default_rng(seed)
    worst, worst_over_bound, violations = 0.0, 0.0, 0
    for _ in range(instances):
        n, s = int(rng.integers(k + 2, 13)), int(rng.integers(3, 9))
        delta = float(rng.choice([0.5, 1.0, 2.0]))
        P = _random_weighted(rng, n, 2, weighted=False)
        A, surv, rv, _ = valid_instance(rng, n, s, delta)
        cfg = RunConfig(algorithm="kmedian", s=s, k=k, delta=delta, seed=int(rng.integers(2 ** 63)),
                        stragglers=StragglerModel.explicit(sorted(set(range(s)) - set(surv))),
                        local_solver="exact", coordinator_solver="exact")
        res = run_kmedian(cfg, P, assignment=A)
        _, opt = kmedian_exact(P, k)
        bound = 6.0 * (1.0 + delta) * opt
        ratio = res.cost / opt if opt > 0 else 1.0
        worst = max(worst, ratio)
        worst_over_bound = max(worst_over_bound, res.cost / bound if bound > 0 else 0.0)
        if res.cost > bound * (1 + 1e-12) + 1e-12:
            violations += 1
    return {"suite": "thm4", "passed": violations == 0, "instances": instances, "violations": violations,
            "worst_ratio_vs_opt": worst, "worst_fraction_of_bound": worst_over_bound}


def jacobi_pca_cost(P: WeightedDataset, r: int) -> float:
    """Optimal r-PCA residual from the independent Jacobi SVD."""
    _, S, _ = jacobi_svd(np.sqrt(P.weights)[:, None] * P.points)
    return math.fsum((S[r:] ** 2).tolist())


@suite("thm7")
def verify_thm7(instances: int = 50, seed: int = 9, lossless: bool = False, **_) -> dict:
    """Distributed PCA: cost(P, L_hat) <= (1 + 4 delta) cost(P, L*), L* from a Jacobi SVD."""
    rng = np.random.default_rng(seed)
    worst, violations = 0.0, 0
    for _ in range(instances):
        if lossless:
            P, r, s, _, p_t = _pca_instance(rng, max_d=8, max_r=2)
            delta = 0.1  # r1 = ceil(r + 10 r) - 1 >= d
        else:
            P, r, s, delta, p_t = _pca_instance(rng)
        res = _strict_pca_run(rng, P, r, s, delta, p_t)
        opt = jacobi_pca_cost(P, r)
        ratio = res.cost / opt if opt > 0 else 1.0
        worst = max(worst, ratio)
        bound = 1.0 if lossless else 1.0 + 4.0 * delta
        if res.cost > bound * opt * (1 + 1e-8) + 1e-12:
            violations += 1
    return {"suite": "thm7", "passed": violations == 0, "instances": instances, "violations": violations,
            "worst_ratio": worst, "lossless": lossless}


@suite("thm8")
def verify_thm8(n: int = 200, s: int = 20, pt: float = 0.2, delta: float = 1.0, trials: int = 500,
                seed: int = 0, pa: float | None = None, **_) -> dict:
    """Empirical frequency of the resilience property under i.i.d. stragglers versus the 1 - 1/n guarantee."""
    ell, gamma = theorem_ell(delta, pt, n)
    bound_driven = pa is None
    p_a = min(ell / s, 1.0) if bound_driven else pa
    freq = property_frequency(n, s, p_a, StragglerModel.random_iid(pt), delta, trials, seed)
    bound = 1.0 - 1.0 / n
    return {"suite": "thm8", "passed": (freq >= bound) if bound_driven else True, "n": n, "s": s, "p_t": pt,
            "delta": delta, "ell": ell, "gamma": gamma, "p_a": p_a, "bound_driven": bound_driven,
            "trials": trials, "success_fraction": freq, "bound": bound}


def run_suite(name: str, **params) -> dict:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown verify suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(**params)
