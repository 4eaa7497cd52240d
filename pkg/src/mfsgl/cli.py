"""Command-line front end: ``mfsgl {synth,fit,select,eval,sweep}``.

Exit codes: 0 ok, 1 I/O or input data, 2 configuration, 3 numeric failure.
Configs are JSON; relative paths inside a config resolve against the
config file's directory.
"""

import argparse
import csv
import itertools
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import data_io, evaluation, graph, projection, solver, synth
from .errors import (DimensionMismatch, FileMissing, InvalidConfig, InvalidCount, InvalidLabels,
                     KTooLarge, ManifestError, MFSGLError, NonFiniteValue, ParseError)

log = logging.getLogger("mfsgl")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
RANKING_INLINE = 100
SWEEP_HEADER = ["k", "gamma", "s", "acc", "nmi", "status"]

_IO_ERRORS = (FileMissing, ParseError, ManifestError, DimensionMismatch, NonFiniteValue,
              InvalidLabels, OSError)
_CONFIG_ERRORS = (InvalidConfig, InvalidCount, KTooLarge)


def exit_code(exc):
    if isinstance(exc, _IO_ERRORS):
        return EXIT_IO
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, (MFSGLError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    raise exc


# ---------------------------------------------------------------- config

_SOLVER_FIELDS = {f.name for f in fields(solver.SolverConfig)}
_RUN_KEYS = {"dataset", "normalize", "solver", "select", "eval", "output", "grid", "workers"}


def read_run_config(path):
    """Parse and validate a run config; returns a dict with resolved paths."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig("config must be a JSON object")
    unknown = set(doc) - _RUN_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    if "dataset" not in doc:
        raise InvalidConfig("config needs a 'dataset' manifest path")
    base = path.parent
    resolve = lambda p: Path(p) if Path(p).is_absolute() else base / p  # noqa: E731
    sdoc = doc.get("solver", {})
    bad = set(sdoc) - _SOLVER_FIELDS
    if bad:
        raise InvalidConfig(f"unknown solver fields: {sorted(bad)}")
    try:
        cfg = solver.SolverConfig(**sdoc)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc
    cfg.validate()
    normalize = doc.get("normalize", "minmax")
    if normalize not in ("none", "minmax", "zscore"):
        raise InvalidConfig(f"normalize must be none, minmax or zscore, got {normalize!r}")
    sizes = doc.get("select", [])
    if not isinstance(sizes, list) or not all(isinstance(s, int) and s >= 1 for s in sizes):
        raise InvalidConfig("select must be a list of positive integers")
    ev = {"restarts": evaluation.DEFAULT_RESTARTS, "seed": 0}
    ev.update(doc.get("eval", {}))
    if set(ev) - {"restarts", "seed"} or not (isinstance(ev["restarts"], int) and ev["restarts"] >= 1):
        raise InvalidConfig(f"eval needs integer restarts >= 1 and a seed, got {ev}")
    dataset = resolve(doc["dataset"])
    if not dataset.is_file():
        raise FileMissing(dataset)
    workers = doc.get("workers", 1)
    if not (isinstance(workers, int) and workers >= 1):
        raise InvalidConfig("workers must be a positive integer")
    return {"dataset": dataset, "normalize": normalize, "solver": cfg, "select": sizes,
            "eval": ev, "output": resolve(doc["output"]) if "output" in doc else None,
            "grid": doc.get("grid"), "workers": workers, "raw": doc}


def load_for_fit(run):
    raw = data_io.load_dataset(run["dataset"])
    return raw, data_io.normalize_views(raw, run["normalize"])


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    out = Path(args.out)
    if args.kind == "two-moon":
        spec = synth.TwoMoonSpec(n_per_cluster=args.n, variant=args.variant,
                                 moon_noise_sd=args.moon_noise_sd,
                                 noise_view_dim=args.noise_view_dim,
                                 noise_view_sd=args.noise_view_sd, seed=args.seed)
        ds, mask = synth.make_two_moon(spec), None
        extra = {"generator": {"kind": "two-moon", "n_per_cluster": spec.n_per_cluster,
                               "variant": spec.variant, "moon_noise_sd": spec.moon_noise_sd,
                               "noise_view_dim": spec.noise_view_dim,
                               "noise_view_sd": spec.noise_view_sd,
                               "noise_view_distribution": "isotropic gaussian",
                               "seed": spec.seed, "prng": "numpy Philox, one stream per view"}}
    else:
        spec = synth.PlantedSpec(n=args.n, c=args.c, informative=tuple(args.informative),
                                 noise=tuple(args.noise), separation=args.separation,
                                 noise_sd=args.noise_sd, seed=args.seed)
        ds, mask = synth.make_planted(spec)
        extra = {"generator": {"kind": "planted", "n": spec.n, "c": spec.c,
                               "informative": list(spec.informative), "noise": list(spec.noise),
                               "separation": spec.separation, "noise_sd": spec.noise_sd,
                               "seed": spec.seed, "prng": "numpy Philox, one stream per view"}}
    manifest = data_io.save_dataset(ds, out, extra=extra)
    for v, X in enumerate(ds.views):
        # whitespace columns: coordinates then label, ready for gnuplot and friends
        cols = np.vstack([X, ds.labels[None, :]]).T
        names = [f"x{i}" for i in range(X.shape[0])] + ["label"]
        with open(out / f"scatter_view{v}.txt", "w") as fh:
            fh.write("# " + " ".join(names) + "\n")
            for row in cols:
                fh.write(" ".join(data_io.FLOAT_FMT % x for x in row[:-1]) + f" {int(row[-1])}\n")
    if mask is not None:
        with open(out / "planted_mask.csv", "w") as fh:
            fh.write("view,feature,informative\n")
            for v, m in enumerate(mask):
                fh.writelines(f"{v},{i},{int(b)}\n" for i, b in enumerate(m))
    print(manifest)
    return EXIT_OK


# ---------------------------------------------------------------- fit

def _ranking_json(ranking, limit=RANKING_INLINE):
    return [{"rank": r, "view": e.view, "feature": e.feature, "score": e.score}
            for r, e in enumerate(ranking[:limit])]


def build_report(run, ds, state, ranking, evaluations=None):
    cfg = run["solver"]
    report = {
        "dataset": str(run["raw"]["dataset"]),
        "normalize": run["normalize"],
        "config": cfg.to_dict(),
        "n": ds.n, "views": ds.V, "dims": ds.dims,
        "projection_dims": cfg.view_dims(ds.dims),
        "status": state.status,
        "converged": state.converged,
        "initial": {"mu": state.init_mu, "component_count": state.init_component_count},
        "iterations": [{"objective": r.objective, "lambda": r.lam, "mu": r.mu,
                        "component_count": r.component_count, "alpha": r.alpha,
                        "inner_iterations": r.inner_iterations} for r in state.iterations],
        "final": {"component_count": state.component_count, "lambda": state.lam,
                  "mu": state.mu, "alpha": state.alpha.tolist(),
                  "normalized_alpha": state.normalized_alpha.tolist(),
                  "eigenvalues": state.eigenvalues.tolist()},
        "ranking_top": _ranking_json(ranking),
        "ranking_file": "ranking.csv",
        "timings": {k: round(v, 6) for k, v in state.timings.items()},
    }
    if evaluations is not None:
        report["evaluation"] = evaluations
    return report


def write_artifacts(out, state, ranking):
    out.mkdir(parents=True, exist_ok=True)
    solver.save_ranking(out / "ranking.csv", ranking)
    graph.save_graph(out / "graph.txt", state.S)
    for v, W in enumerate(state.projections):
        projection.save_projection(out / f"W_view{v}.txt", W)
    projection.save_projection(out / "F.txt", state.F)


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def eval_selection(raw, ranking, s, c, restarts, seed, normalize):
    """Reduced dataset for the top ``s`` features, normalized, then clustered."""
    reduced = data_io.normalize_views(solver.select_features(raw, ranking, s), normalize)
    scores = evaluation.evaluate(reduced.views, reduced.labels, c, restarts, seed)
    return {"s": s, **scores}


def cmd_fit(args):
    run = read_run_config(args.config)
    out = Path(args.out) if args.out else run["output"]
    if out is None:
        raise InvalidConfig("no output directory: set 'output' in the config or pass --out")
    raw, ds = load_for_fit(run)
    cfg = run["solver"].validate(ds)
    t0 = time.perf_counter()
    state = solver.fit(ds, cfg)
    fit_time = time.perf_counter() - t0
    ranking = solver.rank_features(state)
    evaluations = None
    if run["select"]:
        if raw.labels is None:
            raise InvalidConfig("selection sizes given but the dataset has no labels")
        evaluations = [eval_selection(raw, ranking, s, cfg.c, run["eval"]["restarts"],
                                      run["eval"]["seed"], run["normalize"])
                       for s in run["select"]]
    write_artifacts(out, state, ranking)
    report = build_report(run, ds, state, ranking, evaluations)
    report["timings"]["fit_total"] = round(fit_time, 6)
    write_json(out / "report.json", report)
    print(f"{state.status} components={state.component_count} "
          f"iterations={len(state.iterations)} report={out / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------- select

def cmd_select(args):
    raw = data_io.load_dataset(args.dataset)
    ranking = solver.load_ranking(args.ranking)
    counts = np.zeros(raw.V, dtype=int)
    for e in ranking:
        if not 0 <= e.view < raw.V or not 0 <= e.feature < raw.dims[e.view]:
            raise InvalidCount(f"ranking entry (view {e.view}, feature {e.feature}) "
                               f"is outside the dataset dims {raw.dims}")
        counts[e.view] += 1
    if counts.tolist() != raw.dims:
        raise InvalidCount(f"ranking covers {counts.tolist()} features per view, "
                           f"dataset has {raw.dims}")
    reduced = solver.select_features(raw, ranking, args.s)
    manifest = data_io.save_dataset(reduced, args.out, extra={"selected_top": args.s})
    with open(Path(args.out) / "selected_features.csv", "w") as fh:
        fh.write("rank,view,feature\n")
        fh.writelines(f"{r},{e.view},{e.feature}\n" for r, e in enumerate(ranking[:args.s]))
    print(manifest)
    return EXIT_OK


# ---------------------------------------------------------------- eval

def format_eval(scores, seed, restarts):
    return f"acc={scores['acc']:.6f} nmi={scores['nmi']:.6f} seed={seed} restarts={restarts}"


def cmd_eval(args):
    ds = data_io.load_dataset(args.dataset)
    labels = ds.labels
    if args.labels:
        labels = data_io.read_labels(args.labels)
        if labels.shape[0] != ds.n:
            raise InvalidConfig(f"{labels.shape[0]} labels for {ds.n} samples")
    if labels is None:
        raise InvalidConfig("evaluation needs labels (manifest labels_path or --labels)")
    c = args.c if args.c is not None else int(np.unique(labels).size)
    if c < 1:
        raise InvalidConfig("c must be >= 1")
    ds = data_io.normalize_views(ds, args.normalize)
    scores = evaluation.evaluate(ds.views, labels, c, args.restarts, args.seed)
    line = format_eval(scores, args.seed, args.restarts)
    print(line)
    if args.report:
        path = Path(args.report)
        doc = json.loads(path.read_text()) if path.is_file() else {}
        doc.setdefault("evaluations", []).append(
            {"dataset": str(args.dataset), "c": c, "seed": args.seed,
             "restarts": args.restarts, **scores})
        write_json(path, doc)
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def sweep_cell(raw, ds, base, k, gamma, sizes, ev, normalize, c):
    """One (k, gamma) fit, scored at every selection size.  Never raises."""
    try:
        cfg = solver.SolverConfig(**{**base.to_dict(), "k": k, "gamma": gamma}).validate(ds)
        state = solver.fit(ds, cfg)
        ranking = solver.rank_features(state)
    except Exception as exc:  # recorded per cell, the sweep goes on
        status = f"failed:{type(exc).__name__}"
        log.warning("cell k=%s gamma=%s failed: %s", k, gamma, exc)
        return [(k, gamma, s, float("nan"), float("nan"), status) for s in sizes]
    rows = []
    for s in sizes:
        try:
            r = eval_selection(raw, ranking, s, c, ev["restarts"], ev["seed"], normalize)
            rows.append((k, gamma, s, r["acc"], r["nmi"], state.status))
        except Exception as exc:
            rows.append((k, gamma, s, float("nan"), float("nan"), f"failed:{type(exc).__name__}"))
    return rows


def run_sweep(run, workers=None):
    grid = run["grid"]
    if not isinstance(grid, dict):
        raise InvalidConfig("sweep needs a 'grid' object with k, gamma and s lists")
    axes = {}
    for key in ("k", "gamma", "s"):
        vals = grid.get(key)
        if not isinstance(vals, list) or not vals:
            raise InvalidConfig(f"grid axis {key!r} must be a nonempty list")
        axes[key] = vals
    raw, ds = load_for_fit(run)
    if raw.labels is None:
        raise InvalidConfig("sweep needs labels for scoring")
    base = run["solver"]
    c = base.c
    cells = list(itertools.product(axes["k"], axes["gamma"]))
    width = workers or run["workers"]
    with ThreadPoolExecutor(max_workers=width) as pool:
        futures = [pool.submit(sweep_cell, raw, ds, base, k, g, axes["s"], run["eval"],
                               run["normalize"], c) for k, g in cells]
        # single collector, grid order
        rows = [row for fut in futures for row in fut.result()]
    return rows


def write_sweep(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for k, g, s, a, n, status in rows:
            w.writerow([k, repr(float(g)), s, repr(float(a)), repr(float(n)), status])


def best_row(rows):
    ok = [r for r in rows if not r[5].startswith("failed") and np.isfinite(r[3])]
    if not ok:
        return None
    k, g, s, a, n, status = max(ok, key=lambda r: (r[3], r[4]))
    return {"k": k, "gamma": g, "s": s, "acc": a, "nmi": n, "status": status}


def cmd_sweep(args):
    run = read_run_config(args.config)
    out = Path(args.out) if args.out else run["output"]
    if out is None:
        raise InvalidConfig("no output directory: set 'output' in the config or pass --out")
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(run, args.workers)
    write_sweep(out / "sweep.csv", rows)
    best = best_row(rows)
    failed = sum(r[5].startswith("failed") for r in rows)
    write_json(out / "sweep_summary.json", {"rows": len(rows), "failed": failed, "best": best})
    if best is None:
        print(f"all {len(rows)} rows failed", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"rows={len(rows)} failed={failed} best: k={best['k']} gamma={best['gamma']} "
          f"s={best['s']} acc={best['acc']:.6f} nmi={best['nmi']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser():
    ap = argparse.ArgumentParser(prog="mfsgl",
                                 description="Multi-view feature selection with a learned "
                                             "consensus graph.")
    ap.add_argument("-v", "--verbose", action="count", default=0,
                    help="more logging (-v info, -vv debug)")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a synthetic dataset and its manifest")
    kinds = sp.add_subparsers(dest="kind", required=True)
    tm = kinds.add_parser("two-moon", help="two interleaving moons, 2 or 3 views")
    tm.add_argument("--variant", choices=["pure", "noisy"], default="pure",
                    help="pure: 2 moon views; noisy: plus one Gaussian noise view")
    tm.add_argument("--n", type=int, default=100, help="points per moon (default 100)")
    tm.add_argument("--moon-noise-sd", type=float, default=0.1, help="moon jitter sd")
    tm.add_argument("--noise-view-dim", type=int, default=2, help="noise view dimension")
    tm.add_argument("--noise-view-sd", type=float, default=1.0, help="noise view sd")
    tm.add_argument("--seed", type=int, default=0, help="generator seed")
    tm.add_argument("--out", required=True, help="output directory")
    pl = kinds.add_parser("planted", help="Gaussian blobs with planted informative features")
    pl.add_argument("--n", type=int, default=300, help="samples")
    pl.add_argument("--c", type=int, default=3, help="classes")
    pl.add_argument("--informative", type=int, nargs="+", default=[10, 10, 10],
                    help="informative features per view")
    pl.add_argument("--noise", type=int, nargs="+", default=[40, 40, 40],
                    help="noise features per view")
    pl.add_argument("--separation", type=float, default=6.0, help="class mean spacing")
    pl.add_argument("--noise-sd", type=float, default=1.0, help="feature noise sd")
    pl.add_argument("--seed", type=int, default=0, help="generator seed")
    pl.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)

    fp = sub.add_parser("fit", help="run the solver from a JSON config")
    fp.add_argument("config", help="run config (JSON)")
    fp.add_argument("--out", help="output directory (overrides the config)")
    fp.set_defaults(func=cmd_fit)

    sl = sub.add_parser("select", help="keep the top-s ranked features")
    sl.add_argument("--ranking", required=True, help="ranking.csv written by fit")
    sl.add_argument("--s", type=int, required=True, help="number of features to keep")
    sl.add_argument("--dataset", required=True, help="dataset manifest")
    sl.add_argument("--out", required=True, help="output directory")
    sl.set_defaults(func=cmd_select)

    ep = sub.add_parser("eval", help="k-means on a dataset, scored by ACC and NMI")
    ep.add_argument("--dataset", required=True, help="dataset manifest")
    ep.add_argument("--labels", help="labels file (default: the manifest's)")
    ep.add_argument("--c", type=int, help="clusters (default: number of label classes)")
    ep.add_argument("--restarts", type=int, default=evaluation.DEFAULT_RESTARTS,
                    help="k-means restarts (default 20)")
    ep.add_argument("--seed", type=int, default=0, help="k-means seed")
    ep.add_argument("--normalize", choices=["none", "minmax", "zscore"], default="minmax",
                    help="per-feature scaling before k-means")
    ep.add_argument("--report", help="JSON report to append the scores to")
    ep.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="grid over k, gamma and selection size")
    sw.add_argument("config", help="run config (JSON) with a 'grid' object")
    sw.add_argument("--out", help="output directory (overrides the config)")
    sw.add_argument("--workers", type=int, help="worker pool width (overrides the config)")
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
