"""Batch command-line front door: simulate cohorts, fit chains, evaluate
metrics, run replicated benchmarks and render report tables.

Exit codes: 0 success, 1 runtime/IO error, 2 usage error. A JSON config file
(--config) may supply any flag; explicit command-line flags win. All
randomness flows from --seed; replication r uses seed + r for both the data
draw and the chain. ACBM_THREADS caps the benchmark worker pool.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dgp as dgp_mod
from . import metrics as metrics_mod
from .core import FitSummary, Hyperparams, read_matrix_csv, write_matrix_csv
from .errors import AcbmError
from .metrics import GroundTruth
from .rasch import RaschFit, fit_rasch, rasch_accuracy_matrix
from .sampler import SamplerConfig, run_chain
from .summarize import summarize_trace

USAGE_ERROR = 2
RUNTIME_ERROR = 1

METRIC_FIELDS = ["cwri", "adk", "adw", "adp", "arwri", "d1_acbm", "d1_rasch"]


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _resolve_design(name_or_path, n, seed):
    if name_or_path in dgp_mod.BUILTIN_DESIGNS:
        return dgp_mod.BUILTIN_DESIGNS[name_or_path](n, seed)
    if os.path.exists(name_or_path):
        return dgp_mod.design_from_json(name_or_path, n=n, seed=seed)
    raise UsageError(f"unknown design {name_or_path!r} (not a built-in name or a file)")


class UsageError(Exception):
    pass


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(
        a0=args.a0, b0=args.b0,
        gamma_row=args.gamma, alpha_row=args.alpha,
        gamma_col=args.gamma, alpha_col=args.alpha,
    )


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        n_iter=args.n_iter, n_rep=args.n_rep, burn_in=args.burn_in,
        seed=args.seed, thinning=args.thin,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    design = _resolve_design(args.design, args.n, args.seed)
    X, truth = dgp_mod.generate(design)
    os.makedirs(args.out, exist_ok=True)
    write_matrix_csv(os.path.join(args.out, "matrix.csv"), X)
    truth.save(
        os.path.join(args.out, "truth.json"),
        accuracy_matrix_path=os.path.join(args.out, "truth_accuracy.csv"),
    )
    print(f"wrote {X.n_examinees}x{X.n_questions} matrix and truth to {args.out}")
    return 0


def cmd_fit(args) -> int:
    X = read_matrix_csv(args.matrix)
    h = _hyperparams(args)
    config = _sampler_config(args)
    trace = run_chain(X, h, config, backend=args.backend)
    os.makedirs(args.out, exist_ok=True)
    trace.save_ndjson(os.path.join(args.out, "trace.ndjson"))
    summary = summarize_trace(trace, X, h)
    summary.save(
        os.path.join(args.out, "summary.json"),
        accuracy_matrix_path=os.path.join(args.out, "accuracy_matrix.csv"),
    )
    print(
        f"fit {X.n_examinees}x{X.n_questions}: {summary.col_assign.max() + 1} "
        f"question clusters; outputs in {args.out}"
    )
    return 0


def _evaluate_pair(summary: FitSummary, truth: GroundTruth, rfit: RaschFit | None):
    row = {}
    row["cwri"] = metrics_mod.cwri(summary, truth)
    if truth.clusters:
        row["adk"] = metrics_mod.adk(summary, truth)
        row["adw"] = metrics_mod.adw(summary, truth)
        row["adp"] = metrics_mod.adp(summary, truth)
    else:
        row["adk"] = row["adw"] = row["adp"] = ""
    row["arwri"] = metrics_mod.arwri(summary, truth)
    if summary.accuracy_matrix is not None:
        row["d1_acbm"] = metrics_mod.d1(summary.accuracy_matrix, truth.accuracy_matrix)
    else:
        row["d1_acbm"] = ""
    if rfit is not None:
        row["d1_rasch"] = metrics_mod.d1(rasch_accuracy_matrix(rfit), truth.accuracy_matrix)
    else:
        row["d1_rasch"] = ""
    return row


def cmd_evaluate(args) -> int:
    summary = FitSummary.load(args.summary)
    truth = GroundTruth.load(args.truth)
    rfit = RaschFit.load(args.rasch_fit) if args.rasch_fit else None
    row = _evaluate_pair(summary, truth, rfit)
    _write_csv(args.out, METRIC_FIELDS, [[row[k] for k in METRIC_FIELDS]])
    print(", ".join(f"{k}={_fmt(row[k])}" for k in METRIC_FIELDS if row[k] != ""))
    return 0


def _bench_one(task) -> dict:
    """One replication: simulate, fit ACBM (and Rasch for rasch designs),
    evaluate. Module-level so process pools can pickle it."""
    (design_name, n, rep, base_seed, n_iter, n_rep, burn_in, thin,
     a0, b0, gamma, alpha, backend) = task
    seed = base_seed + rep
    design = dgp_mod.BUILTIN_DESIGNS[design_name](n, seed) \
        if design_name in dgp_mod.BUILTIN_DESIGNS \
        else dgp_mod.design_from_json(design_name, n=n, seed=seed)
    X, truth = dgp_mod.generate(design)
    h = Hyperparams(a0=a0, b0=b0, gamma_row=gamma, alpha_row=alpha,
                    gamma_col=gamma, alpha_col=alpha)
    config = SamplerConfig(n_iter=n_iter, n_rep=n_rep, burn_in=burn_in,
                           seed=seed, thinning=thin)
    trace = run_chain(X, h, config, backend=backend)
    summary = summarize_trace(trace, X, h)
    rfit = fit_rasch(X) if truth.kind == "rasch" else None
    row = _evaluate_pair(summary, truth, rfit)
    row.update({"dgp": os.path.basename(str(design_name)), "n": n,
                "replication": rep, "seed": seed})
    return row


def cmd_bench(args) -> int:
    try:
        n_values = [int(tok) for tok in str(args.n).split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--n must be a comma-separated integer list, got {args.n!r}")
    if not n_values or args.reps < 1:
        raise UsageError("--n needs at least one value and --reps must be >= 1")
    if args.design not in dgp_mod.BUILTIN_DESIGNS and not os.path.exists(args.design):
        raise UsageError(f"unknown design {args.design!r}")

    tasks = [
        (args.design, n, rep, args.seed, args.n_iter, args.n_rep, args.burn_in,
         args.thin, args.a0, args.b0, args.gamma, args.alpha, args.backend)
        for n in n_values
        for rep in range(args.reps)
    ]
    workers = int(os.environ.get("ACBM_THREADS", "1"))
    failures = []
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for task, res in zip(tasks, pool.map(_bench_one, tasks)):
                results.append(res)
    else:
        for task in tasks:
            try:
                results.append(_bench_one(task))
            except Exception as exc:  # noqa: BLE001 - partial-failure report
                failures.append((task[1], task[2], task[3] + task[2], repr(exc)))

    os.makedirs(args.out, exist_ok=True)
    rep_header = ["dgp", "n", "replication", "seed"] + METRIC_FIELDS
    _write_csv(
        os.path.join(args.out, "replications.csv"),
        rep_header,
        [[r.get(k, "") for k in rep_header] for r in results],
    )

    agg_rows = []
    for n in n_values:
        sub = [r for r in results if r["n"] == n]
        if not sub:
            continue
        row = [os.path.basename(str(args.design)), n, len(sub)]
        for k in METRIC_FIELDS:
            vals = [r[k] for r in sub if r.get(k) != ""]
            if vals:
                med, sd = metrics_mod.replication_summary(vals)
                row += [med, sd]
            else:
                row += ["", ""]
        agg_rows.append(row)
    agg_header = ["dgp", "n", "reps"] + [
        f"{k}_{stat}" for k in METRIC_FIELDS for stat in ("median", "sd")
    ]
    _write_csv(os.path.join(args.out, "aggregate.csv"), agg_header, agg_rows)

    if failures:
        _write_csv(
            os.path.join(args.out, "failures.csv"),
            ["n", "replication", "seed", "error"],
            failures,
        )
        print(f"{len(failures)} replications failed; see failures.csv", file=sys.stderr)
        return RUNTIME_ERROR
    print(f"wrote {len(results)} replication rows and {len(agg_rows)} aggregates to {args.out}")
    return 0


def cmd_report(args) -> int:
    summary = FitSummary.load(args.summary)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for cid, cl in enumerate(summary.clusters):
        theta_sorted = sorted(float(t) for t in cl["theta"])
        rows.append([
            cid, cl["size"], cl["K"],
            ";".join(f"{t:.4f}" for t in theta_sorted),
            ";".join(f"{w:.4f}" for w in cl["w"]),
        ])
    _write_csv(
        os.path.join(args.out, "cluster_table.csv"),
        ["cluster", "size", "K", "theta_sorted", "w"],
        rows,
    )

    if args.clusters:
        try:
            a, b = (int(tok) for tok in args.clusters.split(","))
        except ValueError:
            raise UsageError(f"--clusters must be 'a,b', got {args.clusters!r}")
        if a not in summary.row_assign or b not in summary.row_assign:
            raise UsageError(f"cluster ids {a},{b} not present in the summary")
        ra = np.asarray(summary.row_assign[a])
        rb = np.asarray(summary.row_assign[b])
        Ka, Kb = int(ra.max()) + 1, int(rb.max()) + 1
        table = np.zeros((Ka, Kb), dtype=np.int64)
        for i in range(len(ra)):
            table[ra[i], rb[i]] += 1
        _write_csv(
            os.path.join(args.out, f"contingency_{a}_{b}.csv"),
            [f"c{a}\\c{b}"] + [f"block{k}" for k in range(Kb)],
            [[f"block{k}"] + table[k].tolist() for k in range(Ka)],
        )
    print(f"report tables written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_sampler_flags(p):
    p.add_argument("--n-iter", type=int, default=200)
    p.add_argument("--n-rep", type=int, default=400)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--a0", type=float, default=0.01)
    p.add_argument("--b0", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--backend", default=None, choices=[None, "compiled", "python"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acbm",
        description="Constrained binomial-mixture item-response model toolkit",
    )
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--design", required=True, help="dgp1|dgp2|dgp3|dgp4 or a design JSON path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run one chain and summarize it")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score a fit summary against a truth file")
    p.add_argument("--summary", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--rasch-fit", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="replicated simulate+fit+evaluate benchmark")
    p.add_argument("--design", required=True)
    p.add_argument("--n", required=True, help="comma-separated examinee counts")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render per-cluster and contingency tables")
    p.add_argument("--summary", required=True)
    p.add_argument("--clusters", default=None, help="pair 'a,b' for a contingency table")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # config file supplies defaults; explicit flags override on re-parse
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            with open(argv[idx + 1]) as fh:
                overrides = json.load(fh)
        except (IndexError, OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return USAGE_ERROR
        for p in [parser] + list(parser._subparsers._group_actions[0].choices.values()):
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()
                              if k.replace("-", "_") in known})
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (AcbmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
