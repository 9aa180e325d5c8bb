"""Command-line entry point: synth, ingest, train, eval, predict-stream, report."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import queue
import sys
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _accel
from .errors import ConfigError, IoError, NRPredictError, RowParseError, SchemaMismatch
from .eval import ERROR_BANDS, compare_models, evaluate, export_histogram, export_scatter, r2, write_json
from .ingest import (FEATURES, TARGET_KINDS, ConsoleParser, Dataset, _check_header, align_timestamps,
                     derive_features, parse_csv_trace, parse_srsran_console, sample_from_record, write_csv)
from .models import MODEL_KINDS, HyperParams, canonical_kind, default_hyper, fit_model, load_model, predict, save_model
from .preprocess import SplitSpec, prepare
from .synthgen import GeneratorConfig, generate_trace, write_trace

log = logging.getLogger("nrpredict")

_CONFIG_SECTIONS = {"generator", "split", "outliers", "hyper", "band", "window", "bins"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Effective parameters of one invocation (config file, then flags)."""

    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    z_threshold: float = 3.0
    max_outlier_fraction: float = 0.1
    hyper: dict = field(default_factory=dict)  # kind -> override dict
    band: float | None = None
    window: int = 100
    bins: int = 20

    def hyper_for(self, kind: str, seed: int | None) -> HyperParams:
        kind = canonical_kind(kind)
        over = dict(self.hyper.get("*", {}))
        over.update(self.hyper.get(kind, {}))
        if seed is not None:
            over["seed"] = seed
        try:
            return default_hyper(kind, **over)
        except TypeError as exc:
            raise ConfigError(f"bad hyperparameters for {kind}: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "generator": asdict(self.generator),
            "split": asdict(self.split),
            "outliers": {"z_threshold": self.z_threshold, "max_fraction": self.max_outlier_fraction},
            "hyper": self.hyper,
            "band": self.band,
            "window": self.window,
            "bins": self.bins,
        }


def load_run_config(path: str | None, seed: int | None) -> RunConfig:
    raw: dict = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(raw) - _CONFIG_SECTIONS
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    gen = dict(raw.get("generator", {}))
    split = dict(raw.get("split", {}))
    if seed is not None:
        gen["seed"] = seed
        split["seed"] = seed
    try:
        split_spec = SplitSpec(**split)
    except TypeError as exc:
        raise ConfigError(f"bad split section: {exc}") from None
    outl = raw.get("outliers", {})
    hyper = raw.get("hyper", {})
    if not isinstance(hyper, dict) or not all(isinstance(v, dict) for v in hyper.values()):
        raise ConfigError("hyper section must map model kinds to objects")
    hyper = {(k if k == "*" else canonical_kind(k)): v for k, v in hyper.items()}
    cfg = RunConfig(
        generator=GeneratorConfig.from_dict(gen),
        split=split_spec,
        z_threshold=float(outl.get("z_threshold", 3.0)),
        max_outlier_fraction=float(outl.get("max_fraction", 0.1)),
        hyper=hyper,
        band=raw.get("band"),
        window=int(raw.get("window", 100)),
        bins=int(raw.get("bins", 20)),
    )
    if cfg.window < 1:
        raise ConfigError("window must be >= 1")
    return cfg


def _out_path(out_dir: str, name: str | None, default: str) -> str:
    path = name or default
    if not os.path.isabs(path) and name is None:
        path = os.path.join(out_dir, path)
    parent = os.path.dirname(path)
    if parent:
        try:
            os.makedirs(parent, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create {parent}: {exc.strerror or exc}") from None
    return path


def read_trace(path: str, fmt: str = "auto", interval_ms: int = 1000) -> Dataset:
    if fmt == "auto":
        fmt = "csv" if path.endswith(".csv") else "console"
    try:
        if fmt == "csv":
            return parse_csv_trace(path)
        with open(path, encoding="utf-8") as fh:
            return align_timestamps(parse_srsran_console(fh, interval_ms), interval_ms)
    except FileNotFoundError:
        raise IoError(f"no such file: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: RunConfig) -> int:
    over = {}
    if args.n is not None:
        over["n_samples"] = args.n
    if args.mobility:
        over["mobility"] = True
    gen = GeneratorConfig.from_dict({**asdict(cfg.generator), **over})
    path = _out_path(args.out_dir, args.out, "trace.csv")
    log.info("effective config: %s", json.dumps({"generator": asdict(gen)}, sort_keys=True))
    ds = generate_trace(gen)
    try:
        meta = write_trace(ds, gen, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    print(f"wrote {len(ds)} samples to {path} (metadata {meta})")
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    ds = read_trace(args.input, args.format, args.interval_ms)
    path = _out_path(args.out_dir, args.out, "ingested.csv")
    try:
        write_csv(ds, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    print(f"ingested {len(ds)} samples ({len(ds.rejected)} rejected) from {args.input} -> {path}")
    for err in ds.rejected[:10]:
        print(f"  rejected {err}", file=sys.stderr)
    return 0


def _split(args, cfg: RunConfig, target: str):
    ds = read_trace(args.input, args.format, args.interval_ms)
    spec = cfg.split
    if args.time_ordered:
        spec = replace(spec, shuffle=False)
    if args.train_fraction is not None:
        spec = replace(spec, train_fraction=args.train_fraction)
    train, test, clipped = prepare(derive_features(ds, target), spec, cfg.z_threshold, cfg.max_outlier_fraction)
    if clipped.capped:
        log.warning("outlier rule hit the %.0f%% removal cap", 100 * cfg.max_outlier_fraction)
    if clipped.degenerate:
        log.warning("target is constant; outlier step skipped")
    return train, test, spec


def cmd_train(args, cfg: RunConfig) -> int:
    kind = canonical_kind(args.model)
    train, test, spec = _split(args, cfg, args.target)
    hyper = cfg.hyper_for(kind, args.seed)
    log.info("effective config: %s", json.dumps({**cfg.to_dict(), "split": asdict(spec), "model": kind,
                                                 "target": args.target, "hyper_effective": hyper.to_dict()},
                                                sort_keys=True))
    model = fit_model(kind, train, hyper, n_jobs=args.n_jobs)
    path = _out_path(args.out_dir, args.out, f"model_{kind}_{args.target}.json")
    save_model(model, path)
    report, _ = evaluate(model, test, cfg.bins, args.band if args.band is not None else cfg.band)
    print(f"model {kind} target {args.target}: train {train.n} test {test.n}")
    print(f"test MSE {report.mse:.6g}  RMSE {report.rmse:.6g}  R2 {report.r2:.6f}")
    print(f"saved {path}")
    return 0


def _format_importance(rep: dict) -> str:
    imp = rep["importance"]
    return "  ".join(f"{k}={v:.3f}" for k, v in imp.items())


def format_report(doc: dict) -> str:
    unit = " (Mbps^2)" if doc.get("target_kind") == "throughput" else ""
    lines = [f"target: {doc['target_kind']}   test rows: {doc['n_test']}", ""]
    head = f"{'model':<14} {'MSE' + unit:>16} {'RMSE':>10} {'R2':>9} {'in-band':>8}"
    lines += [head, "-" * len(head)]
    for row in doc["table"]:
        rep = doc["reports"][row["model_kind"]]
        lines.append(f"{row['model_kind']:<14} {row['mse']:>16.5f} {row['rmse']:>10.5f} {row['r2']:>9.5f} "
                     f"{rep['error_histogram']['within_band']:>8.3f}")
    lines += ["", "feature importance:"]
    for row in doc["table"]:
        rep = doc["reports"][row["model_kind"]]
        flag = " (uniform fallback)" if rep.get("importance_fallback") else ""
        lines.append(f"  {row['model_kind']:<14} {_format_importance(rep)}{flag}")
    return "\n".join(lines)


def cmd_eval(args, cfg: RunConfig) -> int:
    train, test, spec = _split(args, cfg, args.target)
    kinds = [canonical_kind(k) for k in args.models] if args.models else list(MODEL_KINDS)
    hypers = {k: cfg.hyper_for(k, args.seed) for k in kinds}
    band = args.band if args.band is not None else cfg.band
    effective = {**cfg.to_dict(), "split": asdict(spec), "target": args.target, "band": band,
                 "hyper_effective": {k: h.to_dict() for k, h in hypers.items()}}
    log.info("effective config: %s", json.dumps(effective, sort_keys=True))
    cmp = compare_models(train, test, hypers, kinds, n_jobs=args.n_jobs, n_bins=cfg.bins, band=band)
    doc = cmp.to_dict()
    doc["config"] = effective
    os.makedirs(args.out_dir, exist_ok=True)
    tag = args.target
    write_json(doc, os.path.join(args.out_dir, f"report_{tag}.json"))
    for kind, rep in cmp.reports.items():
        export_scatter(test.target, cmp.predictions[kind], os.path.join(args.out_dir, f"scatter_{tag}_{kind}.csv"))
        export_histogram(rep.error_histogram, os.path.join(args.out_dir, f"errors_{tag}_{kind}.csv"))
    text = format_report(doc)
    try:
        with open(os.path.join(args.out_dir, f"report_{tag}.txt"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report: {exc.strerror or exc}") from None
    print(text)
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    for i, path in enumerate(args.reports):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path} is not a JSON report: {exc}") from None
        if not {"table", "reports", "target_kind", "n_test"} <= set(doc):
            raise SchemaMismatch(f"{path} is not a comparison report")
        if i:
            print()
        print(format_report(doc))
    return 0


# ---------------------------------------------------------------------------
# streaming


_EOF = object()


@dataclass
class StreamStats:
    n: int = 0
    skipped: int = 0
    latencies: list = field(default_factory=list)


def _parse_lines(lines, fmt: str, interval_ms: int, handoff: queue.Queue) -> None:
    """Producer: turn raw lines into samples; ``put`` blocks when the queue is full."""
    try:
        if fmt == "console":
            parser = ConsoleParser(interval_ms)
            for line in lines:
                s = parser.feed(line)
                if s is not None:
                    handoff.put(s)
        else:
            header = None
            row = 0
            for line in lines:
                if not line.strip():
                    continue
                cells = next(csv.reader([line]))
                if header is None:
                    header = _check_header(cells)
                    continue
                row += 1
                try:
                    if len(cells) != len(header):
                        raise RowParseError(row, f"expected {len(header)} fields, got {len(cells)}")
                    handoff.put(sample_from_record(dict(zip(header, cells)), row))
                except RowParseError as err:
                    handoff.put(err)
    except BaseException as exc:  # hand every failure to the consumer
        handoff.put(exc)
    finally:
        handoff.put(_EOF)


def run_stream(model, lines, out, err, fmt: str = "csv", window: int = 100, interval_ms: int = 1000,
               queue_size: int = 64) -> StreamStats:
    """Two-stage pipeline: a parser thread feeds a bounded queue, this thread
    predicts and writes ``timestamp_ms,actual,predicted,abs_error`` per sample.

    Every ``window`` samples the R^2 of the last ``window`` samples goes to
    ``err`` so that ``out`` carries exactly one line per sample.
    """
    target = model.target_kind
    if target not in TARGET_KINDS or tuple(model.scaler.feature_names) != FEATURES[target]:
        raise SchemaMismatch(f"model features {list(model.scaler.feature_names)} / target {target!r} "
                             "do not match a stream target")
    # warm-up: compile or load the prediction kernel before the first sample
    predict(model, np.zeros((1, len(model.scaler.feature_names))))
    handoff: queue.Queue = queue.Queue(maxsize=queue_size)
    producer = threading.Thread(target=_parse_lines, args=(lines, fmt, interval_ms, handoff), daemon=True)
    return _consume(model, target, handoff, producer, out, err, window)


def _consume(model, target, handoff, producer, out, err, window) -> StreamStats:
    producer.start()
    ys: deque = deque(maxlen=window)
    ps: deque = deque(maxlen=window)
    stats = StreamStats()
    while True:
        item = handoff.get()
        if item is _EOF:
            break
        if isinstance(item, RowParseError):
            stats.skipped += 1
            print(f"RowParseError: {item} (skipped)", file=err)
            continue
        if isinstance(item, BaseException):
            raise item
        t0 = time.perf_counter()
        s = item
        if target == "throughput":
            x, y = (s.cqi, s.mcs, s.tti_count, s.bler), s.dl_thr_mbps
        else:
            x, y = (s.cqi, s.mcs, s.tti_count, s.brate_mbps), s.bler
        yhat = float(predict(model, np.array([x], dtype=np.float64))[0])
        out.write(f"{s.timestamp_ms},{y!r},{yhat!r},{abs(y - yhat)!r}\n")
        out.flush()
        stats.latencies.append(time.perf_counter() - t0)
        stats.n += 1
        ys.append(y)
        ps.append(yhat)
        if stats.n % window == 0:
            try:
                score = f"{r2(list(ys), list(ps)):.4f}"
            except NRPredictError:
                score = "undefined"
            print(f"rolling_r2 samples={stats.n} window={len(ys)} r2={score}", file=err)
            err.flush()
    producer.join()
    return stats


def cmd_predict_stream(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    if args.input in (None, "-"):
        src, owned = sys.stdin, False
    else:
        try:
            src, owned = open(args.input, encoding="utf-8", newline=""), True
        except OSError as exc:
            raise IoError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    window = args.window or cfg.window
    try:
        stats = run_stream(model, iter(src.readline, ""), sys.stdout, sys.stderr, args.format, window,
                           args.interval_ms, args.queue_size)
    finally:
        if owned:
            src.close()
    if stats.latencies:
        lat = np.asarray(stats.latencies) * 1e3
        print(f"streamed {stats.n} samples ({stats.skipped} skipped); latency ms p50={np.median(lat):.4f} "
              f"p99={np.percentile(lat, 99):.4f} max={lat.max():.4f}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=dflt(None), help="seed for generator, split and models")
    parser.add_argument("--config", default=dflt(None), help="JSON run configuration")
    parser.add_argument("--out-dir", default=dflt("."), help="directory for output artifacts")
    parser.add_argument("--backend", choices=("numba", "numpy"), default=dflt(None),
                        help="kernel backend (default: numba unless NRPREDICT_DISABLE_NUMBA is set)")
    parser.add_argument("-q", "--quiet", action="store_true", default=dflt(False),
                        help="suppress the effective-config log on standard error")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, help="trace file (canonical CSV or gNB console log)")
    p.add_argument("--format", choices=("auto", "csv", "console"), default="auto")
    p.add_argument("--interval-ms", type=int, default=1000, help="reporting interval for console logs")
    p.add_argument("--target", choices=TARGET_KINDS, default="throughput")
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--time-ordered", action="store_true", help="split in row order instead of shuffling")
    p.add_argument("--band", type=float, default=None,
                   help=f"in-band error half-width (default {ERROR_BANDS['throughput']} / {ERROR_BANDS['bler']})")
    p.add_argument("--n-jobs", type=int, default=1, help="forest worker threads")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    ap = argparse.ArgumentParser(prog="nrpredict", description="Downlink throughput/BLER regression toolkit.")
    _globals(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic trace")
    p.add_argument("--n", type=int, default=None, help="number of samples")
    p.add_argument("--mobility", action="store_true")
    p.add_argument("--out", default=None, help="CSV path (default <out-dir>/trace.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="convert a trace to canonical CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("auto", "csv", "console"), default="auto")
    p.add_argument("--interval-ms", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="fit one model and save it")
    _data_args(p)
    p.add_argument("--model", default="lgbm_style", help=f"one of {', '.join(MODEL_KINDS)} (or short alias)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="compare all models on one split")
    _data_args(p)
    p.add_argument("--models", nargs="+", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict-stream", parents=[common], help="predict sample by sample from a stream")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", default="-", help="input file, '-' for standard input")
    p.add_argument("--format", choices=("csv", "console"), default="csv")
    p.add_argument("--interval-ms", type=int, default=1000)
    p.add_argument("--window", type=int, default=None, help="rolling R^2 window (default 100)")
    p.add_argument("--queue-size", type=int, default=64)
    p.set_defaults(func=cmd_predict_stream)

    p = sub.add_parser("report", parents=[common], help="print saved comparison reports")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.backend:
            _accel.set_backend(args.backend)
        cfg = load_run_config(args.config, args.seed)
        return args.func(args, cfg)
    except NRPredictError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
