"""Command-line entry point: generate, inspect, train, predict, run, evaluate, bench, dump-features.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bench import MODES, benchmark_pair, find_pair, write_report
from .classify import FOREST, LOGISTIC, fit, load_model, predict_proba, save_model
from .collective import CollectiveResult, run_baseline
from .data import Dataset, LabelState, fmt, load_dataset, write_csv
from .datagen import generate, write_dataset
from .errors import ConfigInvalid, HinError, SchemaMismatch
from .evaluation import METRIC_NAMES, metrics, rela_impr, significance_report
from .experiment import ExperimentConfig, WindowData, run_window, window_data
from .features import compute_all_features
from .metapath import downsized_paths, pair_paths
from .seeds import child_seed

log = logging.getLogger("hinfraud")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="YAML experiment config")
    g.add_argument("--seed", type=int, help="root seed; overrides the config")
    g.add_argument("--out-dir", type=Path, default=Path("."), help="directory for output files")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker cap for feature columns and trees")
    g.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _data_arg(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument(
        "--data", type=Path, required=required,
        help="dataset directory; without it the configured generator runs in memory",
    )


def _window_arg(p: argparse.ArgumentParser, allow_all: bool = False) -> None:
    p.add_argument(
        "--window", help="1-based sliding window" + (" or 'all'" if allow_all else "") + " (default: from config)"
    )
    p.add_argument("--window-count", type=int, help="number of windows (default: from config)")


def _classifier_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classifier", choices=[FOREST, LOGISTIC], help="base classifier kind")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hinfraud", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _common(p)

    p = sub.add_parser("inspect-paths", help="list downsized meta-paths and feature pairs")
    _common(p)
    _data_arg(p)

    p = sub.add_parser("train", help="fit a classifier on the base features of a window's training rows")
    _common(p)
    _data_arg(p)
    _window_arg(p)
    _classifier_args(p)

    p = sub.add_parser("predict", help="apply a saved base-feature model to a window's test rows")
    _common(p)
    _data_arg(p)
    _window_arg(p)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("run", help="collective prediction loop with per-iteration report")
    _common(p)
    _data_arg(p)
    _window_arg(p, allow_all=True)
    _classifier_args(p)
    p.add_argument("--max-iters", type=int, help="cap on feature-augmented rounds")
    p.add_argument("--epsilon", type=float, help="stop once the label-change fraction drops below this")

    p = sub.add_parser("evaluate", help="metrics and feature significance from saved predictions")
    _common(p)
    _data_arg(p)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--window-count", type=int, help="number of windows (default: from config)")

    p = sub.add_parser("bench", help="time decomposed against materialized feature computation")
    _common(p)
    _data_arg(p)
    p.add_argument("--pairs", default="all", help="'all', or comma list of pair ids / one-hop end types")
    p.add_argument("--modes", default=",".join(MODES), help="comma list of dense,decomposed")
    p.add_argument("--repeats", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--oracle-cap", type=int, help="largest n the dense route accepts; 0 lifts the cap")
    p.add_argument("--parallel", action="store_true", help="also time all columns at --threads workers")

    p = sub.add_parser("dump-features", help="write the meta-path feature table of a window")
    _common(p)
    _data_arg(p)
    _window_arg(p)
    p.add_argument("--predictions", type=Path, help="test labels to aggregate (default: baseline predictions)")
    return parser


# -- helpers -----------------------------------------------------------------


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    updates = {}
    if getattr(args, "window_count", None) is not None:
        updates["window_count"] = args.window_count
    window = getattr(args, "window", None)
    if window not in (None, "all"):
        updates["window"] = _int(window, "--window")
    elif "window_count" in updates:
        updates["window"] = min(cfg.window, updates["window_count"])
    if getattr(args, "classifier", None):
        updates["classifier"] = replace(cfg.classifier, kind=args.classifier)
    if getattr(args, "max_iters", None) is not None:
        updates["max_iterations"] = args.max_iters
    if getattr(args, "epsilon", None) is not None:
        updates["early_stop_fraction"] = args.epsilon
    return replace(cfg, **updates) if updates else cfg


def _int(value: str, flag: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{flag} expects an integer, got {value!r}") from None


def _dataset(args, cfg: ExperimentConfig) -> Dataset:
    if args.data is not None:
        return load_dataset(args.data)
    log.info("no --data given; generating in memory with seed %d", cfg.generate.seed)
    return generate(cfg.generate).dataset


def _out(args) -> Path:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    return args.out_dir


def _windows(args, cfg: ExperimentConfig) -> list[int]:
    if getattr(args, "window", None) == "all":
        return list(range(1, cfg.window_count + 1))
    return [cfg.window]


def _f(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else fmt(x)


def _relaimpr(method: float, base: float) -> float:
    return rela_impr(method, base) if base > 0 else math.nan


def _read_predictions(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"transaction_id", "window", "label"} <= set(rows[0]):
        raise SchemaMismatch(f"{path}: expected columns transaction_id, window, label")
    return rows


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args, cfg: ExperimentConfig) -> int:
    synth = generate(cfg.generate)
    out = write_dataset(synth, _out(args))
    ds = synth.dataset
    print(f"wrote {ds.hin.n} transactions ({int(ds.y_true.sum())} fraud) to {out}")
    return EXIT_OK


def cmd_inspect_paths(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    paths = downsized_paths(ds.hin, threads=args.threads)
    pairs = pair_paths(paths)
    out = _out(args)
    write_csv(
        out / "paths.csv", ["path_id", "trace", "end_type", "nnz", "simple"],
        ((k, str(p.trace), p.trace.end_type, p.nnz, int(p.is_simple)) for k, p in enumerate(paths)),
    )
    write_csv(
        out / "pairs.csv", ["pair_id", "left", "right", "end_type", "semantics"],
        ((k, p.left, p.right, p.end_type, p.semantics_label) for k, p in enumerate(pairs)),
    )
    for k, p in enumerate(paths):
        print(f"path {k:3d}  nnz={p.nnz:<8d} simple={int(p.is_simple)}  {p.trace}")
    print(f"{len(paths)} downsized paths, c={len(pairs)} feature pairs")
    return EXIT_OK


def cmd_train(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    wd = window_data(ds, [], cfg.window_count, cfg.window)
    model = fit(cfg.classifier, wd.X[wd.train], wd.y_true[wd.train], threads=args.threads)
    path = _out(args) / "model.json"
    save_model(model, path)
    print(f"trained {model.kind} on {int(wd.train.sum())} rows of window {cfg.window}; wrote {path}")
    return EXIT_OK


def cmd_predict(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    model = load_model(args.model)
    wd = window_data(ds, [], cfg.window_count, cfg.window)
    proba = predict_proba(model, wd.X[wd.test])
    pred = (proba >= model.spec.threshold).astype(int)
    ids = np.asarray(ds.txn_ids)[wd.rows[wd.test]]
    write_csv(
        _out(args) / "predictions.csv", ["transaction_id", "window", "label", "probability"],
        ((t, cfg.window, int(l), fmt(p)) for t, l, p in zip(ids, pred, proba)),
    )
    print(_metrics_line(f"window {cfg.window}", metrics(wd.y_true[wd.test], pred)))
    return EXIT_OK


def _metrics_line(tag: str, m: dict) -> str:
    return f"{tag}: " + " ".join(f"{k}={m[k]:.4f}" for k in METRIC_NAMES)


REPORT_HEADER = (
    ["window", "iteration", "change_fraction"]
    + list(METRIC_NAMES)
    + [f"relaimpr_{k}" for k in METRIC_NAMES]
    + ["converged"]
)


def _report_rows(window: int, res: CollectiveResult):
    base = res.history.records[0].metrics
    for rec in res.history.records:
        yield (
            [window, rec.iteration, _f(rec.change_fraction)]
            + [_f(rec.metrics[k]) for k in METRIC_NAMES]
            + [_f(_relaimpr(rec.metrics[k], base[k])) for k in METRIC_NAMES]
            + [int(res.history.converged_at == rec.iteration)]
        )


def cmd_run(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    out = _out(args)
    t_start = time.perf_counter()
    paths = downsized_paths(ds.hin, threads=args.threads)
    report, predictions, timings = [], [], {}
    model = None
    for w in _windows(args, cfg):
        wd = window_data(ds, paths, cfg.window_count, w)
        res = run_window(wd, cfg.loop_config(args.threads))
        model = res.model
        report.extend(_report_rows(w, res))
        base = res.history.records[0]
        ids = np.asarray(ds.txn_ids)[wd.rows[wd.test]]
        predictions.extend(
            (t, w, int(l), fmt(p), int(bl), fmt(bp))
            for t, l, p, bl, bp in zip(ids, res.test_labels, res.test_proba, base.test_labels, base.test_proba)
        )
        timings[f"window_{w}"] = {k: round(v, 6) for k, v in sorted(res.timings.items())}
        first, last = res.history.records[0].metrics, res.history.records[-1].metrics
        print(_metrics_line(f"window {w} iteration 0", first))
        print(_metrics_line(f"window {w} iteration {res.history.records[-1].iteration}", last))
        if first["recall"] > 0 and first["f_score"] > 0:
            print(
                f"window {w} RelaImpr: recall {rela_impr(last['recall'], first['recall']):+.2f}% "
                f"f_score {rela_impr(last['f_score'], first['f_score']):+.2f}%"
            )
        print(f"window {w} converged at iteration {res.history.converged_at}")
    write_csv(out / "report.csv", REPORT_HEADER, report)
    write_csv(
        out / "predictions.csv",
        ["transaction_id", "window", "label", "probability", "baseline_label", "baseline_probability"],
        predictions,
    )
    save_model(model, out / "model.json")
    timings["total"] = round(time.perf_counter() - t_start, 6)
    (out / "timings.json").write_text(json.dumps(timings, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def _window_predictions(rows: list[dict], ds: Dataset, wd: WindowData, column: str) -> np.ndarray:
    index = {t: i for i, t in enumerate(np.asarray(ds.txn_ids)[wd.rows])}
    labels = np.full(len(wd.rows), -1, dtype=np.int64)
    for r in rows:
        if int(r["window"]) != wd.window:
            continue
        i = index.get(r["transaction_id"])
        if i is None or wd.train[i]:
            raise SchemaMismatch(f"{r['transaction_id']!r} is not a test transaction of window {wd.window}")
        labels[i] = int(r[column])
    missing = int((labels[wd.test] < 0).sum())
    if missing:
        raise SchemaMismatch(f"window {wd.window}: {missing} test transactions have no prediction")
    return labels[wd.test]


def cmd_evaluate(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    rows = _read_predictions(args.predictions)
    has_base = "baseline_label" in rows[0]
    windows = sorted({int(r["window"]) for r in rows})
    paths = downsized_paths(ds.hin, threads=args.threads)
    pairs = pair_paths(paths)
    semantics = [p.semantics_label for p in pairs]
    table, sig = [], []
    for w in windows:
        wd = window_data(ds, paths, cfg.window_count, w)
        truth = wd.y_true[wd.test]
        pred = _window_predictions(rows, ds, wd, "label")
        m = metrics(truth, pred)
        if has_base:
            mb = metrics(truth, _window_predictions(rows, ds, wd, "baseline_label"))
            table.append([w, "baseline"] + [_f(mb[k]) for k in METRIC_NAMES] + ["nan"] * len(METRIC_NAMES))
            table.append(
                [w, "final"] + [_f(m[k]) for k in METRIC_NAMES] + [_f(_relaimpr(m[k], mb[k])) for k in METRIC_NAMES]
            )
        else:
            table.append([w, "final"] + [_f(m[k]) for k in METRIC_NAMES] + ["nan"] * len(METRIC_NAMES))
        print(_metrics_line(f"window {w}", m))
        labels = wd.label_state()
        labels.update_test(pred)
        Z = compute_all_features(
            wd.paths, pairs, labels.snapshot(), prior=labels.prior,
            options=cfg.loop_config().features, threads=args.threads,
        )
        report = significance_report(
            Z, wd.y_true, wd.test, semantics,
            sample_size=cfg.sample_size, alpha=cfg.alpha, seed=child_seed(cfg.seed, f"significance/{w}"),
        )
        sig.extend([w, r.column, r.semantics, _f(r.t), _f(r.p), "yes" if r.significant else "no"] for r in report)
        print(f"window {w}: {sum(r.significant for r in report)}/{len(report)} features significant at {cfg.alpha}")
    out = _out(args)
    write_csv(
        out / "metrics.csv",
        ["window", "stage"] + list(METRIC_NAMES) + [f"relaimpr_{k}" for k in METRIC_NAMES],
        table,
    )
    write_csv(out / "significance.csv", ["window", "column", "semantics", "t", "p", "significant"], sig)
    return EXIT_OK


def _parse_pairs(spec: str, paths, pairs) -> list[int]:
    if spec == "all":
        return list(range(len(pairs)))
    ids = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok.isdigit():
            k = int(tok)
            if k >= len(pairs):
                raise ConfigInvalid(f"pair id {k} out of range (c={len(pairs)})")
            ids.append(k)
        else:
            try:
                ids.append(find_pair(paths, pairs, tok))
            except KeyError as exc:
                raise ConfigInvalid(str(exc)) from None
    return ids


def cmd_bench(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    modes = [m.strip() for m in args.modes.split(",")]
    if any(m not in MODES for m in modes):
        raise UsageError(f"--modes must be drawn from {MODES}")
    cap = cfg.oracle_cap if args.oracle_cap is None else (args.oracle_cap or None)
    repeats = cfg.bench_repeats if args.repeats is None else args.repeats
    warmup = cfg.bench_warmup if args.warmup is None else args.warmup
    paths = downsized_paths(ds.hin)
    pairs = pair_paths(paths)
    y = ds.y_true.astype(np.float64)
    prior = float(y.mean())
    rows = []
    for k in _parse_pairs(args.pairs, paths, pairs):
        for mode in modes:
            row = benchmark_pair(
                paths, pairs[k], mode, y, prior=prior, self_exclusion=cfg.self_exclusion,
                repeats=repeats, warmup=warmup, cap=cap, pair_id=k,
            )
            rows.append(row)
            print(f"pair {k:3d} {mode:10s} {row.ms:10.3f} ms  peak_nnz={row.peak_nnz:<10d} {row.semantics}")
    if args.parallel:
        times = []
        for _ in range(max(repeats, 1)):
            t0 = time.perf_counter()
            compute_all_features(paths, pairs, y, prior=prior, threads=args.threads)
            times.append((time.perf_counter() - t0) * 1e3)
        print(f"all {len(pairs)} columns, {args.threads} threads: {float(np.median(times)):.3f} ms")
    write_report(_out(args) / "bench.csv", rows)
    return EXIT_OK


def cmd_dump_features(args, cfg: ExperimentConfig) -> int:
    ds = _dataset(args, cfg)
    paths = downsized_paths(ds.hin, threads=args.threads)
    pairs = pair_paths(paths)
    wd = window_data(ds, paths, cfg.window_count, cfg.window)
    labels = wd.label_state()
    if args.predictions is not None:
        labels.update_test(_window_predictions(_read_predictions(args.predictions), ds, wd, "label"))
    else:
        run_baseline(wd.X, labels, cfg.classifier, threads=args.threads)
    Z = compute_all_features(
        wd.paths, pairs, labels.snapshot(), prior=labels.prior, options=cfg.loop_config().features, threads=args.threads
    )
    out = _out(args)
    ids = np.asarray(ds.txn_ids)[wd.rows]
    d = wd.X.shape[1]
    write_csv(
        out / "feature_table.csv",
        ["txn_id"] + [f"x_{k}" for k in range(d)] + [f"z_{k}" for k in range(len(pairs))],
        ([t] + [fmt(v, 17) for v in row] for t, row in zip(ids, np.hstack([wd.X, Z]))),
    )
    write_csv(
        out / "feature_provenance.csv", ["column", "left_path", "right_path", "semantics"],
        ((f"z_{k}", p.left, p.right, p.semantics_label) for k, p in enumerate(pairs)),
    )
    print(f"wrote {Z.shape[0]} x {Z.shape[1]} feature table to {out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "inspect-paths": cmd_inspect_paths,
    "train": cmd_train,
    "predict": cmd_predict,
    "run": cmd_run,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "dump-features": cmd_dump_features,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"hinfraud {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HinError, FileNotFoundError, ValueError) as exc:
        print(f"hinfraud {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled failure", exc_info=True)
        print(f"hinfraud {args.command}: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
