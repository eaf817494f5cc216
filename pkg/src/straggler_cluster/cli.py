"""Command line entry point: ``straggler-cluster <command>``.

Outputs go to ``--out-dir``, else $STRAGGLER_OUTPUT_DIR, else ./results.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .assignment import StragglerModel
from .core import WeightedDataset, load_csv, write_rows
from .experiment import CONDITIONS, ExperimentConfig, experiment_figures, gen_data, write_dataset
from .pipeline import RunConfig, run
from .verify import SUITES, run_suite

OUTPUT_ENV = "STRAGGLER_OUTPUT_DIR"


def output_dir(arg: str | None) -> Path:
    path = Path(arg or os.environ.get(OUTPUT_ENV) or "results")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_gen_data(args) -> int:
    points, centers = gen_data(args.n, args.d, args.k_true, args.spread, args.box, args.seed)
    out = output_dir(args.out_dir)
    write_dataset(out / args.points_name, out / args.centers_name, points, centers)
    sys.stdout.write(_dump({"schema": 1, "points": str(out / args.points_name),
                            "centers": str(out / args.centers_name), "n": args.n, "d": args.d,
                            "k_true": args.k_true, "spread": args.spread, "box": args.box, "seed": args.seed}))
    return 0


def _straggler_model(args) -> StragglerModel | None:
    if args.stragglers is not None:
        nodes = [int(x) for x in args.stragglers.split(",") if x.strip()]
        return StragglerModel.explicit(nodes)
    if args.t is not None:
        return StragglerModel.fixed_count(args.t)
    if args.pt is not None:
        return StragglerModel.random_iid(args.pt)
    return None


def build_run_config(args) -> RunConfig:
    """Flags override values from ``--config``; unset flags keep them."""
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    flags = {
        "algorithm": args.algorithm, "s": args.s, "k": args.k, "r": args.r, "delta": args.delta,
        "p_a": args.pa, "p_t": args.pt, "seed": args.seed, "recovery": args.recovery,
        "n_init": args.n_init, "probes": args.probes, "data": args.data,
        "local_solver": args.local_solver, "coordinator_solver": args.coordinator_solver,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.theorem_ell:
        base["p_a"] = None
    for name in ("baseline", "verify_lemmas", "centralized", "weight_column"):
        if getattr(args, name):
            base[name] = True
    model = _straggler_model(args)
    if model is not None:
        base["stragglers"] = model.to_dict()
    return RunConfig.from_dict(base)


def cmd_run(args) -> int:
    config = build_run_config(args)
    if config.data is None:
        points, _ = gen_data(args.n, 2, config.k, 3.0, 100.0, config.seed)
        data = WeightedDataset.from_points(points)
    else:
        data = load_csv(config.data, weight_column=config.weight_column)
    result = run(config, data)
    out = output_dir(args.out_dir)
    payload = {"config": config.to_dict(), **result.to_dict(include_timings=args.timings)}
    text = _dump(payload)
    (out / f"{args.name}.json").write_text(text)
    if config.algorithm == "kmedian":
        dim = result.model.dim
        write_rows(out / f"{args.name}_centers.csv", result.model.centers.tolist(), [f"x{i}" for i in range(dim)])
    else:
        rows = [[j, c, *basis[:, c].tolist()] for j, basis in enumerate(result.model.bases)
                for c in range(basis.shape[1])]
        write_rows(out / f"{args.name}_bases.csv", rows,
                   ["subspace", "direction", *[f"x{i}" for i in range(result.model.dim)]])
    sys.stdout.write(text)
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig(n=args.n, d=args.d, k=args.k, s=args.s, t=args.t, spread=args.spread, box=args.box,
                           reps=args.reps, seed=args.seed, conditions=tuple(args.conditions), n_init=args.n_init,
                           baseline_partition=args.baseline_partition, points=args.points, centers=args.centers,
                           workers=args.workers)
    summary = experiment_figures(cfg, output_dir(args.out_dir))
    sys.stdout.write(_dump(summary))
    return 0


VERIFY_PARAMS = ("instances", "seed", "probes", "n", "s", "pt", "delta", "trials", "pa", "lossless")


def cmd_verify(args) -> int:
    params = {k: getattr(args, k) for k in VERIFY_PARAMS if getattr(args, k) not in (None, False)}
    report = {"schema": 1, **run_suite(args.name, **params)}
    text = _dump(report)
    (output_dir(args.out_dir) / f"verify_{args.name}.json").write_text(text)
    sys.stdout.write(text)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="straggler-cluster",
                                     description="Straggler-resilient distributed clustering simulator.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_out(p):
        p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
        return p

    g = with_out(sub.add_parser("gen-data", help="write a synthetic Gaussian mixture and its centers"))
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--k-true", type=int, default=15)
    g.add_argument("--spread", type=float, default=3.0)
    g.add_argument("--box", type=float, default=100.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points-name", default="points.csv")
    g.add_argument("--centers-name", default="centers.csv")
    g.set_defaults(func=cmd_gen_data)

    r = with_out(sub.add_parser("run", help="run one distributed pipeline"))
    r.add_argument("--config", help="RunConfig JSON file; flags given here override it")
    r.add_argument("--algorithm", choices=["kmedian", "subspace", "pca"])
    r.add_argument("--data", help="points CSV (default: generate n points of the synthetic mixture)")
    r.add_argument("--weight-column", action="store_true", help="last CSV column holds point weights")
    r.add_argument("--n", type=int, default=5000, help="size of the generated dataset when --data is absent")
    pa = r.add_mutually_exclusive_group()
    pa.add_argument("--pa", type=float, help="replication probability p_a")
    pa.add_argument("--theorem-ell", action="store_true", help="derive p_a from the straggler-resilience bound")
    r.add_argument("--pt", type=float, help="i.i.d. straggler probability")
    r.add_argument("--t", type=int, help="exactly t uniformly random stragglers")
    r.add_argument("--stragglers", help="explicit comma-separated straggler nodes")
    r.add_argument("--s", type=int)
    r.add_argument("--delta", type=float)
    r.add_argument("--k", type=int)
    r.add_argument("--r", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--baseline", action="store_true", help="no redundancy: partition points across nodes")
    r.add_argument("--recovery", choices=["strict", "best_effort"])
    r.add_argument("--verify-lemmas", action="store_true", help="check the cost sandwiches on random probes")
    r.add_argument("--probes", type=int)
    r.add_argument("--centralized", action="store_true", help="also report the centralized cost")
    r.add_argument("--n-init", type=int)
    r.add_argument("--local-solver", choices=["heuristic", "exact"])
    r.add_argument("--coordinator-solver", choices=["heuristic", "exact"])
    r.add_argument("--name", default="result", help="output file stem")
    r.add_argument("--timings", action="store_true", help="include wall-clock timings (not reproducible)")
    r.set_defaults(func=cmd_run)

    e = with_out(sub.add_parser("experiment-figures", help="run the four-condition k-median experiment"))
    e.add_argument("--n", type=int, default=5000)
    e.add_argument("--d", type=int, default=2)
    e.add_argument("--k", type=int, default=15)
    e.add_argument("--s", type=int, default=10)
    e.add_argument("--t", type=int, default=3)
    e.add_argument("--spread", type=float, default=3.0)
    e.add_argument("--box", type=float, default=100.0)
    e.add_argument("--reps", type=int, default=20)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--conditions", nargs="+", default=list(CONDITIONS))
    e.add_argument("--n-init", type=int, default=1)
    e.add_argument("--baseline-partition", choices=["contiguous", "random"], default="contiguous")
    e.add_argument("--points", help="load points from CSV instead of generating them")
    e.add_argument("--centers", help="ground-truth centers CSV for --points")
    e.add_argument("--workers", type=int, default=1, help="repetitions run in parallel processes")
    e.set_defaults(func=cmd_experiment)

    v = with_out(sub.add_parser("verify", help="run a randomized bound-checking suite"))
    v.add_argument("name", choices=sorted(SUITES))
    v.add_argument("--instances", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--probes", type=int)
    v.add_argument("--n", type=int)
    v.add_argument("--s", type=int)
    v.add_argument("--pt", type=float)
    v.add_argument("--delta", type=float)
    v.add_argument("--trials", type=int)
    v.add_argument("--pa", type=float, help="thm8: fixed p_a instead of the bound-derived value (reported only)")
    v.add_argument("--lossless", action="store_true", help="thm7: use r1 >= d so the ratio must be 1")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
