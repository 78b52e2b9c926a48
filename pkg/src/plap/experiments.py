"""Experiment drivers behind the command-line interface.

Each driver takes an ExperimentConfig, runs the requested solves with
per-iteration instrumentation, writes plot-ready tables into the output
directory, and returns a summary dict (also serialized as JSON).
"""

import json
import time
from pathlib import Path

import numpy as np

from .datasets import load_csv_dataset, load_idx, write_records
from .dirls import DirlsConfig, solve
from .errors import ConfigError, DataError
from .graphs import SslTask, build_ssl_problem, knn_graph, pca_features
from .newton import NewtonConfig, newton_solve
from .nfunction import PowerNFunction, RegularizedNFunction, RelaxationInterval
from .records import write_dat
from .regression import build_lifted, lp_residual, random_instance
from .sparse import CgConfig

__all__ = [
    "make_family",
    "run_regression_experiment",
    "run_ssl_experiment",
    "two_blob_dataset",
    "ssl_accuracy_series",
]


def make_family(p, delta):
    if delta is None:
        return PowerNFunction(p)
    return RegularizedNFunction(PowerNFunction(p), RelaxationInterval(*delta))


def dirls_config(cfg, oversolve=1.0, max_outer=None):
    return DirlsConfig(
        gap_tol=cfg.gap_tol * oversolve,
        max_outer=max_outer if max_outer is not None else cfg.max_outer,
        inner=CgConfig(rel_tol=cfg.inner_rel_tol),
    )


def run_regression_experiment(cfg, progress=None):
    """Random-instance lp regression sweep with convergence tables.

    For each (p, seed): an over-solved run provides the reference residual
    norm; the per-iteration distance ``|Au^n - b|_p - |Au - b|_p`` lands in a
    plot table next to the record exports.  Newton runs are recorded but
    never asserted on.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"experiment": "regression-convergence", "runs": []}
    for p in cfg.p_values:
        for seed in cfg.seeds:
            inst = random_instance(cfg.m, cfg.n, seed, p=p)
            spec = build_lifted(inst, make_family(p, cfg.delta), validate="skip")
            tag = f"p{p:g}_seed{seed}"
            run = {"p": p, "seed": seed, "solvers": {}}
            records = {}
            series = {}

            if "dirls" in cfg.solvers:
                residuals = []
                cb = lambda st: residuals.append(
                    lp_residual(inst, spec.assemble(st.u_free)[: cfg.n])
                )
                t0 = time.perf_counter()
                u_g, sigma, rec = solve(
                    spec, dirls_config(cfg, oversolve=0.01), callback=cb
                )
                dt = time.perf_counter() - t0
                ref = lp_residual(inst, u_g[: cfg.n])
                series["dIRLS"] = np.asarray(residuals) - ref
                records[f"regress_{tag}_dirls"] = rec
                run["solvers"]["dirls"] = {
                    "status": rec.status,
                    "iterations": len(rec),
                    "seconds": dt,
                    "final_gap": rec.final.gap if len(rec) else None,
                    "reference_lp_residual": ref,
                }
                run["reference_lp_residual"] = ref

            if "newton" in cfg.solvers:
                ncfg = NewtonConfig(eps=cfg.newton_eps, max_outer=min(cfg.max_outer, 60))
                newton_hist = []
                ncb = lambda it, v, g, s: newton_hist.append(
                    lp_residual(inst, spec.assemble(v)[: cfg.n])
                )
                t0 = time.perf_counter()
                u_n, rec_n = newton_solve(spec, ncfg, callback=ncb)
                dt = time.perf_counter() - t0
                records[f"regress_{tag}_newton"] = rec_n
                run["solvers"]["newton"] = {
                    "status": rec_n.status,
                    "iterations": len(rec_n),
                    "seconds": dt,
                    "final_lp_residual": lp_residual(inst, u_n[: cfg.n]),
                }
                if "reference_lp_residual" in run:
                    series["Newton"] = np.asarray(newton_hist) - run[
                        "reference_lp_residual"
                    ]

            write_records(records, out)
            if series:
                n_rows = max(len(v) for v in series.values())
                cols = [np.arange(1, n_rows + 1)]
                names = ["iter"]
                for name, vals in series.items():
                    pad = np.full(n_rows, np.nan)
                    pad[: len(vals)] = vals
                    names.append(name)
                    cols.append(pad)
                write_dat(out / f"distance_{tag}.dat", names, cols)
            summary["runs"].append(run)
            if progress is not None:
                progress(run)

    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def two_blob_dataset(n, seed, dim=10, separation=2.0, spread=0.55):
    """Two Gaussian clusters in ``dim`` dimensions with hidden labels.

    High ambient dimension makes plain quadratic smoothing degenerate at low
    label counts, which is the regime where large exponents pay off.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    center = np.full(dim, separation / np.sqrt(dim))
    pts = np.concatenate(
        [
            rng.normal(0.0, spread, (half, dim)),
            center + rng.normal(0.0, spread, (n - half, dim)),
        ]
    )
    truth = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    return pts, truth


def pick_training_labels(truth, per_class, seed):
    rng = np.random.default_rng(seed)
    labels = {}
    for cls in np.unique(truth):
        members = np.flatnonzero(truth == cls)
        chosen = rng.choice(members, size=min(per_class, len(members)), replace=False)
        for v in chosen:
            labels[int(v)] = int(cls)
    return labels


def ssl_accuracy_series(graph, task, nfun, cfg, truth, threads=1):
    """One-vs-rest solves with per-iteration score snapshots.

    Returns ``(accuracies, predictions, per_class_records)`` where
    ``accuracies[k]`` is the accuracy of the argmax over the class scores at
    outer iterate k+1 (classes that stopped earlier keep their final score).
    Per-class solves are independent, so the numbers do not depend on
    ``threads``.
    """
    snapshots = {}
    per_class = {}

    def run(cls):
        spec = build_ssl_problem(graph, task, cls, nfun)
        us = []
        res = solve(spec, cfg, callback=lambda st: us.append(spec.assemble(st.u_free)))
        return us, res

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {c: pool.submit(run, c) for c in range(task.n_classes)}
            for cls, fut in futures.items():
                snapshots[cls], per_class[cls] = fut.result()
    else:
        for cls in range(task.n_classes):
            snapshots[cls], per_class[cls] = run(cls)
    depth = max(len(us) for us in snapshots.values())
    accuracies = []
    preds = None
    for k in range(depth):
        scores = np.stack(
            [snapshots[c][min(k, len(snapshots[c]) - 1)] for c in range(task.n_classes)],
            axis=1,
        )
        preds = np.argmax(scores, axis=1)
        accuracies.append(float(np.mean(preds == truth)))
    return np.asarray(accuracies), preds, per_class


def _load_ssl_dataset(cfg):
    if cfg.dataset is None:
        return two_blob_dataset(cfg.n_vertices, cfg.seeds[0])
    if ":" in cfg.dataset:
        img_path, lab_path = cfg.dataset.split(":", 1)
        feats = load_idx(img_path)
        labs = load_idx(lab_path)
        if feats.ndim != 2:
            raise DataError(f"{img_path} does not hold images")
        if len(labs) != len(feats):
            raise DataError("image and label counts differ")
        return feats, labs.astype(int)
    feats, labels = load_csv_dataset(cfg.dataset)
    if labels is None or len(labels) < len(feats):
        missing = len(feats) - (0 if labels is None else len(labels))
        raise DataError(f"ssl needs a fully labeled dataset for scoring ({missing} missing)")
    truth = np.array([labels[i] for i in range(len(feats))], dtype=int)
    return feats, truth


def run_ssl_experiment(cfg, progress=None):
    """Graph smoothing benchmark: k-NN graph, one-vs-rest, accuracy table."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    feats, truth = _load_ssl_dataset(cfg)
    seed = cfg.seeds[0]
    if cfg.subsample and cfg.subsample < len(feats):
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(feats), size=cfg.subsample, replace=False))
        feats, truth = feats[keep], truth[keep]
    if cfg.pca_dims:
        feats = pca_features(feats, cfg.pca_dims, seed=seed)

    classes = np.unique(truth)
    task = SslTask(
        feats,
        pick_training_labels(truth, cfg.labels_per_class, seed),
        int(classes.max()) + 1,
    )
    graph = knn_graph(feats, cfg.knn)
    p = cfg.p_values[0]
    accs, preds, per_class = ssl_accuracy_series(
        graph, task, make_family(p, cfg.delta), dirls_config(cfg), truth,
        threads=cfg.threads,
    )

    write_dat(
        out / "accuracy.dat",
        ["iter", "CorrectInPercent"],
        [np.arange(1, len(accs) + 1), 100.0 * accs],
    )
    with open(out / "predictions.csv", "w") as fh:
        fh.write("vertex,predicted,truth\n")
        for v, (pr, tr) in enumerate(zip(preds, truth)):
            fh.write(f"{v},{pr},{tr}\n")
    write_records(
        {f"ssl_class{c}": res.record for c, res in per_class.items()}, out
    )
    summary = {
        "experiment": "ssl-accuracy",
        "n_vertices": int(graph.n_vertices),
        "n_edges": int(graph.n_edges),
        "accuracy_laplacian": float(accs[0]),
        "accuracy_first_reweighted": float(accs[min(1, len(accs) - 1)]),
        "accuracy_final": float(accs[-1]),
        "statuses": {int(c): per_class[c].record.status for c in per_class},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if progress is not None:
        progress(summary)
    return summary
