"""Command-line interface.

Exit codes::

    0  success
    2  usage error
    3  data error (unreadable file, parse error, bad generator parameters)
    4  numerical degeneracy (rank < k); a partial report is still written
    5  verification found a bound violation
    6  exhaustive search over the combinatorial cap

Reports are JSON objects carrying ``"schema": "v1"``; commands producing
several records (``pipeline``, ``bench``) write JSON Lines, one record per
line. A zero volume has log-volume -inf, written as ``null`` (JSON) or an
empty field (CSV). ``DETMAX_THREADS`` caps the worker threads (0 = one per CPU).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

from . import __version__
from .algorithms import (DEFAULT_CAP, DEFAULT_EPS, CombinatorialCapError, brute_force_maxdet,
                         greedy, local_search, run_algorithm)
from .coreset import (PipelineConfig, parse_pair, run_pipeline, summarize,
                      verify_composability, verify_height_suite)
from .data import DataError, DatasetSpec, resolve
from .geometry import NEG_INF, rbf_kernelize

SCHEMA = "v1"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE, EXIT_VIOLATION, EXIT_CAP = 0, 2, 3, 4, 5, 6


def _kernel_arg(text):
    name, _, sigma = text.partition(":")
    try:
        value = float(sigma)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected rbf:SIGMA, got {text!r}") from None
    if name != "rbf" or not value > 0:
        raise argparse.ArgumentTypeError(f"expected rbf:SIGMA with SIGMA > 0, got {text!r}")
    return ("rbf", value)


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"values must be >= 1, got {text!r}")
    return values


def _add_output(p):
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--quiet", action="store_true", help="no progress messages on stderr")


def _add_dataset(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="PATH", help="text file, one point per row")
    src.add_argument("--synthetic", metavar="NAME:ARGS",
                     help="gaussian:N,D | clustered:N,D,CLUSTERS,SPREAD | adversarial:N,D")
    p.add_argument("--data-format", choices=("csv", "whitespace"), default="csv")
    p.add_argument("--header", action="store_true", help="skip the first line of --data")
    p.add_argument("--normalize", action="store_true", help="scale points to unit norm")
    p.add_argument("--kernel", type=_kernel_arg, metavar="rbf:SIGMA")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detmax",
                                     description="Composable core-sets for volume maximization")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coreset", help="build one core-set")
    _add_dataset(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--alg", choices=("greedy", "local-search"), default="local-search")
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    _add_output(p)

    p = sub.add_parser("pipeline", help="simulate partition / core-set / aggregate runs")
    _add_dataset(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, default=10)
    p.add_argument("--reps", type=_positive_int, default=10)
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    p.add_argument("--alg", choices=("greedy", "local-search"), default="greedy",
                   help="core-set algorithm when --compare is not given")
    p.add_argument("--agg-alg", choices=("greedy", "local-search", "brute-force"),
                   default="greedy", help="aggregation algorithm when --compare is not given")
    p.add_argument("--compare", action="append", metavar="AGG/CORESET", default=[],
                   help="algorithm pair such as GD/GD or LS/LS; repeatable")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings (output is then not reproducible)")
    _add_output(p)

    p = sub.add_parser("verify", help="check approximation guarantees empirically")
    p.add_argument("check", choices=("height", "compose"))
    p.add_argument("--alg", choices=("greedy", "local-search"), default="local-search")
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--d", type=_positive_int)
    p.add_argument("--n", type=_positive_int, default=40, help="points per instance (height)")
    p.add_argument("--instances", type=_positive_int, default=50)
    p.add_argument("--m", type=_positive_int, default=3, help="parts (compose)")
    p.add_argument("--n-per-part", type=_positive_int, default=8)
    p.add_argument("--identical-parts", action="store_true")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive search")
    _add_dataset(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--cap", type=_positive_int, default=DEFAULT_CAP)
    _add_output(p)

    p = sub.add_parser("bench", help="greedy vs local search on the whole data set")
    _add_dataset(p)
    p.add_argument("--k", type=_int_list, required=True, metavar="K[,K...]")
    p.add_argument("--eps", type=_positive_float, default=DEFAULT_EPS)
    _add_output(p)
    return parser


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return "" if v is None else str(v)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _finite(obj):
    # strict JSON has no infinities: a zero volume (log = -inf) is written as null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json(obj) -> str:
    return json.dumps(_finite(obj), sort_keys=True, allow_nan=False) + "\n"


def _json_lines(records) -> str:
    return "".join(_json(r) for r in records)


def _emit(args, text):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _envelope(command, config, **extra):
    out = {"schema": SCHEMA, "command": command, "version": __version__, "config": config}
    out.update(extra)
    return out


def _load(args):
    if args.synthetic:
        spec = DatasetSpec.parse_synthetic(args.synthetic, normalize=args.normalize)
    else:
        spec = DatasetSpec(path=args.data, format=args.data_format, header=args.header,
                           normalize=args.normalize)
    ps = resolve(spec, args.seed)
    dataset = spec.describe()
    dataset.update(n=ps.n, dimension=ps.dimension)
    if args.kernel:
        ps = rbf_kernelize(ps, args.kernel[1])
        dataset["kernel"] = f"rbf:{args.kernel[1]!r}"
    return ps, dataset


def cmd_coreset(args) -> int:
    ps, dataset = _load(args)
    t0 = time.perf_counter()
    cs = run_algorithm(args.alg, ps, args.k, args.eps)
    wall = time.perf_counter() - t0
    config = {"k": args.k, "alg": args.alg, "eps": args.eps if args.alg == "local-search" else None,
              "dataset": dataset}
    result = cs.to_dict()
    report = _envelope("coreset", config, seed=args.seed, result=result,
                       timings={"total": wall})
    if args.format == "json":
        _emit(args, _json(report))
    else:
        row = dict(result, wall_time=wall)
        _emit(args, _csv([row], ["algorithm", "k", "eps", "log_volume", "swap_count",
                                 "degenerate", "indices", "wall_time"]))
    _log(args, f"{args.alg}: log-volume {cs.log_volume!r}, {cs.swap_count} swaps, {wall:.3f}s")
    return EXIT_DEGENERATE if cs.degenerate else EXIT_OK


def _pipeline_configs(args):
    pairs = [parse_pair(c) for c in args.compare] or [(args.agg_alg, args.alg)]
    return [PipelineConfig(k=args.k, m=args.m, eps=args.eps, coreset_alg=cs,
                           aggregation_alg=agg, master_seed=args.seed, repetitions=args.reps,
                           kernel=args.kernel) for agg, cs in pairs]


def cmd_pipeline(args) -> int:
    try:
        configs = _pipeline_configs(args)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if len({c.label for c in configs}) != len(configs):
        raise _UsageError("duplicate --compare pairs")
    ps, dataset = _load(args)
    results, records = {}, []
    for cfg in configs:
        reports = run_pipeline(ps, cfg)
        results[cfg.label] = reports
        for r in reports:
            records.append(_envelope("pipeline", dict(cfg.to_dict(), dataset=dataset),
                                     **r.to_dict(include_timings=args.timings)))
    summary = summarize(results)
    records.append(_envelope("pipeline", {"labels": list(results), "dataset": dataset,
                                          "master_seed": args.seed}, **summary))
    if args.format == "json":
        _emit(args, _json_lines(records))
    else:
        cols = ["label", "run_index", "seed", "union_size", "final_log_volume",
                "aggregation_swap_count", "degenerate", "final_indices"]
        text = _csv([r for r in records if r["kind"] == "run"], cols)
        text += "\n" + _csv(summary["comparisons"],
                            ["baseline", "candidate", "runs", "mean_det_ratio",
                             "mean_volume_ratio", "mean_log_volume_gain", "fraction_improved"])
        _emit(args, text)
    for c in summary["comparisons"]:
        _log(args, f"{c['candidate']} over {c['baseline']}: mean det ratio {c['mean_det_ratio']}")
    degenerate = any(r.final.degenerate for reps in results.values() for r in reps)
    return EXIT_DEGENERATE if degenerate else EXIT_OK


def cmd_verify(args) -> int:
    if args.check == "height":
        k = 3 if args.k is None else args.k
        d = 6 if args.d is None else args.d
        if k - 1 > d:
            raise _UsageError(f"--k {k} needs --d >= {k - 1}")
        trials = 1000 if args.trials is None else args.trials
        rep = verify_height_suite(args.alg, min(args.instances, trials), trials, n=args.n, d=d,
                                  k=k, eps=args.eps, seed=args.seed)
        config = {"check": "height", "alg": args.alg, "k": k, "d": d, "n": args.n,
                  "instances": min(args.instances, trials), "trials": trials, "eps": args.eps}
        result = rep.to_dict()
        msg = f"worst height ratio {rep.worst_ratio!r} (floor {rep.floor!r})"
    else:
        k = 2 if args.k is None else args.k
        d = 5 if args.d is None else args.d
        trials = 100 if args.trials is None else args.trials
        rep = verify_composability(d=d, n_per_part=args.n_per_part, m=args.m, k=k, eps=args.eps,
                                   trials=trials, seed=args.seed, algorithm=args.alg,
                                   identical_parts=args.identical_parts)
        config = {"check": "compose", "alg": args.alg, "k": k, "d": d, "m": args.m,
                  "n_per_part": args.n_per_part, "trials": trials, "eps": args.eps,
                  "identical_parts": args.identical_parts}
        result = rep.to_dict()
        msg = f"worst det ratio {rep.worst_ratio!r} (bound {rep.bound!r})"
    report = _envelope("verify", config, seed=args.seed, result=result)
    if args.format == "json":
        _emit(args, _json(report))
    else:
        _emit(args, _csv([result], list(result)))
    _log(args, f"{args.check}: {msg}, {result['violations']} violations")
    return EXIT_VIOLATION if rep.violation else EXIT_OK


def cmd_oracle(args) -> int:
    ps, dataset = _load(args)
    indices, lv = brute_force_maxdet(ps, args.k, cap=args.cap)
    result = {"indices": indices, "log_volume": lv, "degenerate": lv == NEG_INF}
    report = _envelope("oracle", {"k": args.k, "cap": args.cap, "dataset": dataset},
                       seed=args.seed, result=result)
    if args.format == "json":
        _emit(args, _json(report))
    else:
        _emit(args, _csv([result], ["indices", "log_volume", "degenerate"]))
    _log(args, f"optimum {indices}: log-volume {lv!r}")
    return EXIT_DEGENERATE if lv == NEG_INF else EXIT_OK


def cmd_bench(args) -> int:
    ps, dataset = _load(args)
    records, degenerate = [], False
    for k in args.k:
        t0 = time.perf_counter()
        gd = greedy(ps, k)
        t1 = time.perf_counter()
        ls = local_search(ps, k, args.eps)
        t2 = time.perf_counter()
        diff = ls.log_volume - gd.log_volume if math.isfinite(gd.log_volume) else None
        degenerate |= gd.degenerate
        records.append(_envelope("bench", {"k": k, "eps": args.eps, "dataset": dataset},
                                 seed=args.seed, k=k,
                                 greedy_log_volume=gd.log_volume, ls_log_volume=ls.log_volume,
                                 swap_count=ls.swap_count,
                                 det_ratio=None if diff is None else math.exp(2 * diff),
                                 greedy_time=t1 - t0, ls_time=t2 - t1,
                                 time_ratio=(t2 - t1) / max(t1 - t0, 1e-12)))
    if args.format == "json":
        _emit(args, _json_lines(records))
    else:
        _emit(args, _csv(records, ["k", "greedy_log_volume", "ls_log_volume", "swap_count",
                                   "det_ratio", "greedy_time", "ls_time", "time_ratio"]))
    return EXIT_DEGENERATE if degenerate else EXIT_OK


class _UsageError(Exception):
    pass


COMMANDS = {"coreset": cmd_coreset, "pipeline": cmd_pipeline, "verify": cmd_verify,
            "oracle": cmd_oracle, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"detmax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"detmax: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CombinatorialCapError as exc:
        print(f"detmax: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
