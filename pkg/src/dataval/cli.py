"""Command-line front end and result persistence.

Result payloads are written with a canonical serializer (fixed key order,
floats at 17 significant digits) so reruns with identical inputs, seed, and
thread count produce byte-identical files.  Every result file is accompanied
by a ``<file>.manifest.json`` recording the command, 64-bit content digests
of all inputs, the effective configuration, the tool version, and the wall
clock; reruns differ only in the duration field.

Exit codes: 0 success, 1 data error, 2 usage error.  Errors print a single
``error: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    PrivacyParams,
    dp_value_gap_bounds,
    order_preserving_test,
    stability_value_gap_bounds,
)
from .dataset import DataError, DistanceMetric, load_dataset
from .harness import (
    acquisition_rank,
    detection_curve,
    load_flags,
    select_positive,
    summarization_curve,
)
from .knn_values import KnnConfig, ValueVector, calibrate_k, knn_loo, knn_shapley
from .oracles import (
    KnnUtilityOracle,
    McConfig,
    exact_loo,
    exact_shapley,
    mc_shapley,
    rank_correlation,
)

# ---------------------------------------------------------------------------
# canonical JSON: fixed key order, floats at 17 significant digits


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise DataError("cannot serialize non-finite number")
    text = format(float(x), ".17g")
    # keep a numeric token that still reads back as float
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def dumps_canonical(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{key}": {dumps_canonical(value, indent + 1)}'
            for key, value in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        if flat:
            return "[" + ", ".join(dumps_canonical(v, indent) for v in seq) + "]"
        items = [f"{pad}  " + dumps_canonical(v, indent + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{out}"'
    raise DataError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_canonical(obj) + "\n", encoding="utf-8")


def load_values_json(path) -> dict:
    import json

    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if "values" not in payload:
        raise DataError(f"{path}: missing 'values' field")
    payload["values"] = np.asarray(payload["values"], dtype=np.float64)
    return payload


def digest_file(path) -> str:
    return hashlib.blake2b(Path(path).read_bytes(), digest_size=8).hexdigest()


def write_manifest(out_path, argv, inputs, config, started: float) -> None:
    manifest = {
        "command": list(argv),
        "inputs": {str(p): digest_file(p) for p in inputs},
        "config": config,
        "version": __version__,
        "duration_seconds": time.monotonic() - started,
    }
    write_json(str(out_path) + ".manifest.json", manifest)


def values_payload(vv: ValueVector) -> dict:
    payload = {
        "schema": 1,
        "n": vv.n,
        "k": vv.k,
        "metric": vv.metric,
        "aggregation": vv.aggregation,
        "measure": vv.measure,
    }
    if vv.seed is not None:
        payload["seed"] = vv.seed
    payload["values"] = [float(v) for v in vv.values]
    if vv.per_validation is not None:
        payload["per_validation"] = [
            [float(v) for v in row] for row in vv.per_validation
        ]
    return payload


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                _fmt_float(v) if isinstance(v, float) else str(v) for v in row
            ]
            fh.write(",".join(cells) + "\n")


def _parse_grid(text: str):
    try:
        lo, hi = text.split(":")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise DataError(f"grid must be 'lo:hi', got {text!r}") from None
    if lo < 1 or hi < lo:
        raise DataError(f"invalid grid bounds {text!r}")
    return range(lo, hi + 1)


def _load_schedule(path) -> dict:
    """Two-column CSV (n, value) -> {n: value}."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cells = line.strip()
            if not cells:
                continue
            parts = cells.split(",")
            if lineno == 1 and not parts[0].strip().lstrip("-").isdigit():
                continue  # header
            if len(parts) != 2:
                raise DataError(f"{path}: line {lineno}: expected 'n,value'")
            try:
                out[int(parts[0])] = float(parts[1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: cannot parse {cells!r}") from None
    if not out:
        raise DataError(f"{path}: no data rows")
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_value(args, argv) -> int:
    started = time.monotonic()
    train = load_dataset(args.train)
    val = load_dataset(args.val)
    metric = DistanceMetric.parse(args.metric)

    if args.calibrate:
        k, _ = calibrate_k(train, val, _parse_grid(args.grid), metric)
    else:
        k = args.k
    config = KnnConfig(k=k, metric=metric)
    measure = args.measure

    if measure in ("knn-shapley", "knn-loo"):
        fn = knn_shapley if measure == "knn-shapley" else knn_loo
        vv = fn(train, val, config, aggregation=args.agg, threads=args.threads)
    else:
        if args.agg != "mean":
            raise UsageError(
                f"{measure} averages the utility over validation points; "
                "only --agg mean is defined"
            )
        oracle = KnnUtilityOracle(train, val, config)
        if measure == "exact-shapley":
            values = exact_shapley(oracle, train.n)
            vv = ValueVector(values, "mean", measure, k=k, metric=metric.value)
        elif measure == "exact-loo":
            values = exact_loo(oracle, train.n)
            vv = ValueVector(values, "mean", measure, k=k, metric=metric.value)
        else:  # mc-shapley
            mc = McConfig(
                permutations=args.permutations,
                truncation_tolerance=args.truncation,
                seed=args.seed,
            )
            values, diag = mc_shapley(oracle, train.n, mc)
            vv = ValueVector(values, "mean", measure, k=k, metric=metric.value,
                             seed=args.seed)

    write_json(args.out, values_payload(vv))
    cfg = {
        "measure": measure,
        "k": k,
        "metric": metric.value,
        "aggregation": vv.aggregation,
        "threads": args.threads,
    }
    if measure == "mc-shapley":
        cfg["permutations"] = args.permutations
        cfg["seed"] = args.seed
        cfg["truncation_tolerance"] = args.truncation
        cfg["permutations_used"] = diag.permutations_used
        cfg["mean_truncation_position"] = diag.mean_truncation_position
    write_manifest(args.out, argv, [args.train, args.val], cfg, started)
    return 0


def _cmd_calibrate(args, argv) -> int:
    started = time.monotonic()
    train = load_dataset(args.train)
    val = load_dataset(args.val)
    metric = DistanceMetric.parse(args.metric)
    k, table = calibrate_k(train, val, _parse_grid(args.grid), metric)
    _write_csv(args.out, ["k", "accuracy"], [(kk, float(acc)) for kk, acc in table])
    write_manifest(args.out, argv, [args.train, args.val],
                   {"grid": args.grid, "metric": metric.value, "chosen_k": k},
                   started)
    print(f"chosen_k {k}")
    return 0


def _cmd_detect(args, argv) -> int:
    started = time.monotonic()
    payload = load_values_json(args.values)
    flags = load_flags(args.flags)
    curve = detection_curve(payload["values"], flags)
    _write_csv(args.out, ["fraction_checked", "fraction_detected"],
               list(zip(map(float, curve.fraction_checked),
                        map(float, curve.fraction_detected))))
    summary = {
        "n": int(len(payload["values"])),
        "flagged": int(np.asarray(flags).sum()),
        "recall_at": {f"{f:g}": v for f, v in curve.recall_at.items()},
    }
    write_json(str(args.out) + ".summary.json", summary)
    write_manifest(args.out, argv, [args.values, args.flags], {}, started)
    return 0


def _cmd_summarize(args, argv) -> int:
    started = time.monotonic()
    train = load_dataset(args.train)
    val = load_dataset(args.val)
    heldout = load_dataset(args.heldout)
    payload = load_values_json(args.values)
    metric = DistanceMetric.parse(args.metric)
    fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    rows = summarization_curve(train, val, heldout, payload["values"],
                               fractions, end=args.end, k=args.k, metric=metric)
    _write_csv(args.out, ["drop_fraction", "accuracy"], rows)
    write_manifest(args.out, argv,
                   [args.train, args.val, args.heldout, args.values],
                   {"end": args.end, "k": args.k, "metric": metric.value},
                   started)
    return 0


def _cmd_select(args, argv) -> int:
    started = time.monotonic()
    payload = load_values_json(args.values)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        picked = select_positive(payload["values"])
    out = {"count": int(picked.size), "indices": [int(i) for i in picked]}
    write_json(args.out, out)
    write_manifest(args.out, argv, [args.values], {}, started)
    print(f"selected {picked.size}")
    return 0


def _cmd_acquire(args, argv) -> int:
    started = time.monotonic()
    seed_train = load_dataset(args.seed_train)
    candidates = load_dataset(args.candidates)
    payload = load_values_json(args.values)
    metric = DistanceMetric.parse(args.metric)
    ranked, predicted = acquisition_rank(seed_train, payload["values"],
                                         candidates, r=args.r, metric=metric)
    rows = [(rank, int(c), float(predicted[c])) for rank, c in enumerate(ranked)]
    _write_csv(args.out, ["rank", "candidate_index", "predicted_value"], rows)
    write_manifest(args.out, argv,
                   [args.seed_train, args.values, args.candidates],
                   {"r": args.r, "metric": metric.value}, started)
    return 0


def _cmd_op_test(args, argv) -> int:
    started = time.monotonic()
    train = load_dataset(args.train)
    val = load_dataset(args.val)
    pool = load_dataset(args.pool)
    metric = DistanceMetric.parse(args.metric)
    try:
        i, j = (int(p) for p in args.pair.split(","))
    except ValueError:
        raise UsageError(f"--pair must be 'i,j', got {args.pair!r}") from None
    if not (0 <= args.val_index < val.n):
        raise DataError(f"--val-index {args.val_index} out of range for {val.n} points")
    report = order_preserving_test(
        train, val.features[args.val_index], int(val.labels[args.val_index]),
        args.measure, KnnConfig(k=args.k, metric=metric), (i, j), pool,
        samples=args.samples, seed=args.seed)
    out = {
        "pair": [report.pair[0], report.pair[1]],
        "measure": report.measure,
        "value_gap": report.value_gap,
        "expected_diff": report.expected_diff,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "samples": report.samples,
        "verdict": report.verdict,
    }
    write_json(args.out, out)
    write_manifest(args.out, argv, [args.train, args.val, args.pool],
                   {"measure": args.measure, "k": args.k, "samples": args.samples,
                    "seed": args.seed}, started)
    print(f"verdict {report.verdict}")
    return 0


def _cmd_bounds(args, argv) -> int:
    started = time.monotonic()
    if args.kind == "stability":
        loo_bound, shapley_bound = stability_value_gap_bounds(args.cstab, args.n)
        cfg = {"kind": "stability", "cstab": args.cstab, "n": args.n}
        inputs = []
    else:
        eps = _load_schedule(args.eps_schedule)
        delta = _load_schedule(args.delta_schedule)
        try:
            eps_seq = [eps[i] for i in range(1, args.n)]
            delta_seq = [delta[i] for i in range(1, args.n)]
        except KeyError as exc:
            raise DataError(f"schedule missing entry for size {exc.args[0]}") from None
        params = PrivacyParams(n=args.n, eps_schedule=eps_seq,
                               delta_schedule=delta_seq, c=args.c)
        loo_bound, shapley_bound = dp_value_gap_bounds(params)
        cfg = {"kind": "dp", "n": args.n, "c": args.c}
        inputs = [args.eps_schedule, args.delta_schedule]
    print(f"loo_bound {_fmt_float(loo_bound)}")
    print(f"shapley_bound {_fmt_float(shapley_bound)}")
    if args.out:
        write_json(args.out, {"loo_bound": loo_bound, "shapley_bound": shapley_bound})
        write_manifest(args.out, argv, inputs, cfg, started)
    return 0


def _cmd_rank_corr(args, argv) -> int:
    started = time.monotonic()
    a = load_values_json(args.a)
    b = load_values_json(args.b)
    rho, p = rank_correlation(a["values"], b["values"])
    print(f"rho {_fmt_float(rho)}")
    print(f"p_value {_fmt_float(p)}")
    if args.out:
        write_json(args.out, {"rho": rho, "p_value": p})
        write_manifest(args.out, argv, [args.a, args.b], {}, started)
    return 0


# ---------------------------------------------------------------------------
# parser


class UsageError(Exception):
    pass


def _add_value_parser(sub) -> None:
    p = sub.add_parser("value", help="compute per-training-point values")
    p.add_argument("measure", choices=["knn-shapley", "knn-loo", "exact-shapley",
                                       "exact-loo", "mc-shapley"])
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int)
    group.add_argument("--calibrate", action="store_true")
    p.add_argument("--grid", default="1:10", help="calibration grid lo:hi")
    p.add_argument("--metric", required=True, help="sqeuclidean or cosine")
    p.add_argument("--agg", required=True, choices=["mean", "max", "per-val"])
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--permutations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--truncation", type=float, default=0.0)
    p.set_defaults(func=_cmd_value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dataval",
        description="Per-training-point data values from KNN surrogates, "
                    "with exact and Monte Carlo oracles and application "
                    "pipelines.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_value_parser(sub)

    p = sub.add_parser("calibrate", help="pick K by validation accuracy")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--grid", required=True, help="lo:hi inclusive")
    p.add_argument("--metric", default="sqeuclidean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    apps = sub.add_parser("apps", help="application pipelines").add_subparsers(
        dest="app", required=True)

    p = apps.add_parser("detect", help="detection curve for flagged points")
    p.add_argument("--values", required=True)
    p.add_argument("--flags", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = apps.add_parser("summarize", help="accuracy after dropping ranked slices")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--heldout", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--fractions", required=True, help="comma-separated in [0,1)")
    p.add_argument("--end", choices=["low", "high"], default="low")
    p.add_argument("--k", type=int)
    p.add_argument("--metric", default="sqeuclidean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_summarize)

    p = apps.add_parser("select", help="indices with positive value")
    p.add_argument("--values", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = apps.add_parser("acquire", help="rank candidates by predicted value")
    p.add_argument("--seed-train", required=True, dest="seed_train")
    p.add_argument("--values", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--r", type=int, default=5)
    p.add_argument("--metric", default="sqeuclidean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_acquire)

    p = apps.add_parser("op-test", help="pairwise order-preservingness test")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--val-index", type=int, default=0)
    p.add_argument("--pool", required=True)
    p.add_argument("--pair", required=True, help="i,j")
    p.add_argument("--measure", choices=["knn-shapley", "knn-loo"],
                   default="knn-shapley")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--metric", default="sqeuclidean")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_op_test)

    p = apps.add_parser("bounds", help="value-gap bound evaluators")
    p.add_argument("kind", choices=["stability", "dp"])
    p.add_argument("--cstab", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--eps-schedule", dest="eps_schedule")
    p.add_argument("--delta-schedule", dest="delta_schedule")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    p = apps.add_parser("rank-corr", help="Spearman correlation of two value files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rank_corr)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    # cross-flag requirements argparse cannot express
    try:
        if getattr(args, "measure", None) == "mc-shapley":
            if args.permutations is None or args.seed is None:
                raise UsageError("mc-shapley requires --permutations and --seed")
        if getattr(args, "kind", None) == "stability" and args.cstab is None:
            raise UsageError("bounds stability requires --cstab")
        if getattr(args, "kind", None) == "dp" and (
                args.eps_schedule is None or args.delta_schedule is None):
            raise UsageError("bounds dp requires --eps-schedule and --delta-schedule")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
