"""Synthetic Gaussian-mixture data and the four-condition k-median experiment."""
from __future__ import annotations

import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .assignment import StragglerModel, _derive_seed
from .core import CenterSet, WeightedDataset, assign, cost_points, load_csv, write_rows
from .pipeline import RunConfig, run_kmedian
from .solvers import SolverOptions, kmedian_heuristic


def gen_data(n: int, d: int, k_true: int, spread: float, box: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian mixture: k_true centers uniform in [0, box]^d, n points split evenly.

    Points are ordered by generating center. Returns (points, centers).
    """
    if n < 1 or d < 1 or k_true < 1:
        raise ValueError("need n, d, k_true >= 1")
    if k_true > n:
        raise ValueError(f"k_true={k_true} exceeds n={n}")
    if spread < 0 or box <= 0:
        raise ValueError("need spread >= 0 and box > 0")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, box, size=(k_true, d))
    sizes = np.full(k_true, n // k_true)
    sizes[: n % k_true] += 1
    owner = np.repeat(np.arange(k_true), sizes)
    points = centers[owner] + spread * rng.standard_normal((n, d))
    return points, centers


def write_dataset(points_path, centers_path, points: np.ndarray, centers: np.ndarray) -> None:
    d = points.shape[1]
    header = [f"x{i}" for i in range(d)]
    write_rows(points_path, points.tolist(), header)
    write_rows(centers_path, centers.tolist(), header)


CONDITIONS = ("baseline", "pa=0.1", "pa=0.2")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 5000
    d: int = 2
    k: int = 15
    s: int = 10
    t: int = 3
    spread: float = 3.0
    box: float = 100.0
    reps: int = 20
    seed: int = 0
    conditions: tuple = CONDITIONS
    n_init: int = 1
    baseline_partition: str = "contiguous"
    points: str | None = None
    centers: str | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conditions"] = list(self.conditions)
        return d


def _condition_config(cond: str, cfg: ExperimentConfig, run_seed: int, straggler_seed: int) -> RunConfig:
    common = dict(algorithm="kmedian", s=cfg.s, k=cfg.k, seed=run_seed, n_init=cfg.n_init,
                  stragglers=StragglerModel.fixed_count(cfg.t, straggler_seed), recovery="best_effort")
    if cond == "baseline":
        return RunConfig(baseline=True, baseline_partition=cfg.baseline_partition, **common)
    if cond.startswith("pa="):
        return RunConfig(p_a=float(cond[3:]), **common)
    raise ValueError(f"unknown condition {cond!r}")


def _load_points(cfg: ExperimentConfig):
    P = load_csv(cfg.points)
    centers = load_csv(cfg.centers).points if cfg.centers else None
    return P.points, centers


def run_repetition(cfg: ExperimentConfig, rep: int) -> dict:
    """One repetition: fresh data (unless a file is given), every condition, plus references."""
    if cfg.points:
        points, truth = _load_points(cfg)
    else:
        points, truth = gen_data(cfg.n, cfg.d, cfg.k, cfg.spread, cfg.box, _derive_seed(cfg.seed, rep, 0))
    P = WeightedDataset.from_points(points)
    run_seed = _derive_seed(cfg.seed, rep, 1)
    straggler_seed = _derive_seed(cfg.seed, rep, 2)
    central_centers, central = kmedian_heuristic(P, cfg.k, _derive_seed(cfg.seed, rep, 3), SolverOptions(n_init=cfg.n_init))
    out = {"rep": rep, "centralized_cost": central, "conditions": {}, "labels": {}}
    if truth is not None:
        gt = CenterSet(truth)
        out["conditions"]["ground_truth"] = {"cost": cost_points(P, gt), "lost_points": 0, "retries": 0,
                                             "stragglers": []}
        out["labels"]["ground_truth"] = assign(P.points, gt.centers)[0].tolist()
    out["labels"]["centralized"] = assign(P.points, central_centers.centers)[0].tolist()
    for cond in cfg.conditions:
        res = run_kmedian(_condition_config(cond, cfg, run_seed, straggler_seed), P)
        out["conditions"][cond] = {"cost": res.cost, "lost_points": res.lost_points, "retries": res.retries,
                                   "stragglers": list(res.stragglers)}
        out["labels"][cond] = assign(P.points, res.model.centers)[0].tolist()
    if rep != 0:
        out.pop("labels")
    out["points"] = points.tolist() if rep == 0 else None
    return out


def _stats(values):
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": mean, "stddev": sd}


def experiment_figures(cfg: ExperimentConfig, out_dir) -> dict:
    """Run all conditions over ``cfg.reps`` repetitions and write plot-ready files.

    Writes costs.csv, assignments_<condition>.csv (first repetition) and
    summary.json into ``out_dir``; returns the summary.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps = range(cfg.reps)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_repetition, [cfg] * cfg.reps, reps))
    else:
        results = [run_repetition(cfg, rep) for rep in reps]

    names = list(results[0]["conditions"])
    rows = []
    for res in results:
        for name in names:
            c = res["conditions"][name]
            rows.append([res["rep"], name, float(c["cost"]), float(res["centralized_cost"]),
                         float(c["cost"] / res["centralized_cost"]), c["lost_points"], c["retries"],
                         " ".join(map(str, c["stragglers"]))])
    write_rows(out / "costs.csv", rows,
               ["rep", "condition", "cost", "centralized_cost", "ratio", "lost_points", "retries", "stragglers"])

    first = results[0]
    pts = first["points"]
    for name, labels in first["labels"].items():
        fname = "assignments_" + name.replace("=", "_").replace(".", "p") + ".csv"
        write_rows(out / fname, [[*map(float, p), int(l)] for p, l in zip(pts, labels)],
                   [*(["x", "y"] if len(pts[0]) == 2 else [f"x{i}" for i in range(len(pts[0]))]), "cluster"])

    summary = {"schema": 1, "config": cfg.to_dict(), "centralized": _stats([r["centralized_cost"] for r in results]),
               "conditions": {}}
    for name in names:
        costs = [r["conditions"][name]["cost"] for r in results]
        ratios = [r["conditions"][name]["cost"] / r["centralized_cost"] for r in results]
        summary["conditions"][name] = {"cost": _stats(costs), "ratio_vs_centralized": _stats(ratios),
                                       "mean_lost_points": statistics.fmean(
                                           r["conditions"][name]["lost_points"] for r in results)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
