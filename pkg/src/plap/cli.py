"""Command-line interface: regress | ssl | bench | verify.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver or
check non-success, 5 internal error.  Runs are deterministic for a fixed
configuration, seed, and thread count.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .datasets import ExperimentConfig
from .errors import ConfigError, DataError, PlapError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_INTERNAL = 5

log = logging.getLogger("plap")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plap",
        description=(
            "Reweighted least-squares solvers for graph p-Laplacians and "
            "high-exponent lp regression, with duality-gap certificates."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--p", type=float, action="append", dest="p_values",
                        help="exponent (repeatable)")
        sp.add_argument("--delta-min", type=float)
        sp.add_argument("--delta-max", type=float)
        sp.add_argument("--seed", type=int, action="append", dest="seeds",
                        help="seed (repeatable)")
        sp.add_argument("--solver", action="append", dest="solvers",
                        choices=["dirls", "newton"])
        sp.add_argument("--gap-tol", type=float)
        sp.add_argument("--max-iters", type=int)
        sp.add_argument("--threads", type=int)

    reg = sub.add_parser("regress", help="random-instance lp regression sweep")
    common(reg)
    reg.add_argument("--m", type=int, help="rows of the design matrix")
    reg.add_argument("--n", type=int, help="columns of the design matrix")

    ssl = sub.add_parser("ssl", help="graph smoothing / label propagation")
    common(ssl)
    ssl.add_argument("--dataset", help="CSV path or IMAGES.idx:LABELS.idx")
    ssl.add_argument("--knn", type=int, help="neighbors per vertex")
    ssl.add_argument("--n-vertices", type=int, help="synthetic dataset size")
    ssl.add_argument("--labels-per-class", type=int)
    ssl.add_argument("--subsample", type=int)
    ssl.add_argument("--pca-dims", type=int, help="project features first (0 = off)")

    bench = sub.add_parser("bench", help="exponent sweep at benchmark sizes")
    common(bench)
    bench.add_argument("--m", type=int, help="rows of the design matrix")
    bench.add_argument("--n", type=int, help="columns of the design matrix")
    bench.add_argument("--paper-scale", action="store_true",
                       help="5000x4500 instances instead of 500x450")

    verify = sub.add_parser("verify", help="run the acceptance checks")
    verify.add_argument("--list", action="store_true", dest="list_checks",
                        help="print check names without running")
    verify.add_argument("--only", action="append", help="run a single check")
    verify.add_argument("--quick", action="store_true",
                        help="reduced problem sizes (smoke test, not the gate)")
    return parser


def apply_overrides(cfg, args):
    if getattr(args, "out", None):
        cfg.out_dir = str(args.out)
    if getattr(args, "p_values", None):
        cfg.p_values = [float(p) for p in args.p_values]
    lo = getattr(args, "delta_min", None)
    hi = getattr(args, "delta_max", None)
    if lo is not None or hi is not None:
        base = cfg.delta or (1e-9, 1e9)
        cfg.delta = (lo if lo is not None else base[0],
                     hi if hi is not None else base[1])
    if getattr(args, "seeds", None):
        cfg.seeds = [int(s) for s in args.seeds]
    if getattr(args, "solvers", None):
        cfg.solvers = list(dict.fromkeys(args.solvers))
    if getattr(args, "gap_tol", None) is not None:
        cfg.gap_tol = args.gap_tol
    if getattr(args, "max_iters", None) is not None:
        cfg.max_outer = args.max_iters
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    for name in ("m", "n", "knn", "labels_per_class", "subsample", "dataset",
                 "pca_dims"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "n_vertices", None) is not None:
        cfg.n_vertices = args.n_vertices
    return cfg


def load_config(args, experiment):
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    cfg.experiment = experiment
    return apply_overrides(cfg, args).validate()


def cmd_regress(args):
    from .experiments import run_regression_experiment

    cfg = load_config(args, "regression-convergence")
    cfg.echo()
    summary = run_regression_experiment(
        cfg, progress=lambda run: log.info("finished p=%s seed=%s", run["p"], run["seed"])
    )
    failed = []
    for run in summary["runs"]:
        for solver, info in run["solvers"].items():
            line = (
                f"p={run['p']:g} seed={run['seed']} {solver}: {info['status']} "
                f"({info['iterations']} iterations, {info['seconds']:.1f}s)"
            )
            print(line)
            if solver == "dirls" and info["status"] != "converged":
                failed.append(line)
    if failed:
        print(f"{len(failed)} run(s) did not converge")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_ssl(args):
    from .experiments import run_ssl_experiment

    cfg = load_config(args, "ssl-accuracy")
    cfg.echo()
    summary = run_ssl_experiment(cfg)
    print(
        "accuracy: laplacian {accuracy_laplacian:.4f} -> first reweighted "
        "{accuracy_first_reweighted:.4f} -> final {accuracy_final:.4f}".format(**summary)
    )
    if any(status not in ("converged",) for status in summary["statuses"].values()):
        print("statuses:", summary["statuses"])
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bench(args):
    from .experiments import run_regression_experiment

    cfg = load_config(args, "regression-convergence")
    if getattr(args, "paper_scale", False):
        cfg.m, cfg.n = 5000, 4500
    if not getattr(args, "solvers", None):
        cfg.solvers = ["dirls", "newton"]
    cfg.echo()
    summary = run_regression_experiment(cfg)
    print(f"{'p':>6} {'seed':>5} {'solver':>8} {'status':>22} {'iters':>6} {'secs':>8}")
    bad = 0
    for run in summary["runs"]:
        for solver, info in run["solvers"].items():
            print(
                f"{run['p']:>6g} {run['seed']:>5} {solver:>8} {info['status']:>22} "
                f"{info['iterations']:>6} {info['seconds']:>8.1f}"
            )
            if solver == "dirls" and info["status"] != "converged":
                bad += 1
    return EXIT_SOLVER if bad else EXIT_OK


def cmd_verify(args):
    from .acceptance import AcceptanceContext, check_names, run_acceptance

    if args.list_checks:
        for name in check_names():
            print(name)
        return EXIT_OK
    names = None
    if args.only:
        unknown = set(args.only) - set(check_names())
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")
        names = args.only
    ctx = AcceptanceContext(quick=args.quick)
    results = run_acceptance(names=names, ctx=ctx)
    blocking = [r for r in results if r.blocking]
    expected = [r for r in results if r.expected_failure]
    tail = f", {len(expected)} expected failure(s)" if expected else ""
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed{tail}")
    return EXIT_SOLVER if blocking else EXIT_OK


def main(argv=None):
    level = os.environ.get("PLAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "regress": cmd_regress,
        "ssl": cmd_ssl,
        "bench": cmd_bench,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlapError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
