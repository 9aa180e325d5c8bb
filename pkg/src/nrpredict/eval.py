"""Regression metrics, error distributions and the five-model comparison."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTarget, IoError, LengthMismatch, SchemaMismatch
from .ingest import FeatureMatrix
from .models import MODEL_KINDS, HyperParams, Model, canonical_kind, feature_importance, fit_model, predict

# default "within band" half-widths: Mbps for throughput, dimensionless for BLER
ERROR_BANDS = {"throughput": 2.5, "bler": 0.05}


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise LengthMismatch(f"{y.size} targets vs {yhat.size} predictions")
    if y.size == 0:
        raise LengthMismatch("need at least one sample")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    d = y - yhat
    return float(np.mean(d * d))


def rmse(y, yhat) -> float:
    return math.sqrt(mse(y, yhat))


def r2(y, yhat) -> float:
    """Coefficient of determination; negative for worse-than-mean predictors."""
    y, yhat = _pair(y, yhat)
    if y.size < 2:
        raise DegenerateTarget("R^2 needs at least two samples")
    dev = y - np.mean(y)
    ss_tot = float(np.dot(dev, dev))
    if ss_tot == 0.0:
        raise DegenerateTarget("target has zero variance")
    d = y - yhat
    return 1.0 - float(np.dot(d, d)) / ss_tot


@dataclass(frozen=True)
class ErrorHistogram:
    edges: np.ndarray
    counts: np.ndarray
    band: float
    within_band: float

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": self.counts.tolist(),
                "band": self.band, "within_band": self.within_band}


def error_distribution(y, yhat, n_bins: int = 20, band: float | None = None,
                       target_kind: str | None = None) -> ErrorHistogram:
    """Histogram of ``e = y - yhat`` over ``[min e, max e]`` plus the share of
    ``|e| <= band``. ``band`` defaults to the target's entry in ``ERROR_BANDS``.
    Constant errors are binned over ``[e - 0.5, e + 0.5]``.
    """
    y, yhat = _pair(y, yhat)
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if band is None:
        band = ERROR_BANDS.get(target_kind or "throughput")
    e = y - yhat
    lo, hi = float(e.min()), float(e.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(e, bins=n_bins, range=(lo, hi))
    within = float(np.count_nonzero(np.abs(e) <= band)) / e.size
    return ErrorHistogram(edges, counts.astype(np.int64), float(band), within)


@dataclass
class EvalReport:
    model_kind: str
    target_kind: str | None
    mse: float
    rmse: float
    r2: float
    error_histogram: ErrorHistogram
    importance: np.ndarray
    feature_names: tuple[str, ...]
    n_test: int
    importance_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "target_kind": self.target_kind,
            "mse": self.mse,
            "rmse": self.rmse,
            "r2": self.r2,
            "n_test": self.n_test,
            "error_histogram": self.error_histogram.to_dict(),
            "importance": dict(zip(self.feature_names, self.importance.tolist())),
            "importance_fallback": self.importance_fallback,
        }


def evaluate(model: Model, test: FeatureMatrix, n_bins: int = 20, band: float | None = None) -> tuple[EvalReport, np.ndarray]:
    """Score ``model`` on ``test``; returns the report and the predictions."""
    yhat = predict(model, test.rows, test.feature_names)
    y = test.target
    imp = feature_importance(model)
    report = EvalReport(
        model_kind=model.model_kind,
        target_kind=test.target_kind,
        mse=mse(y, yhat),
        rmse=rmse(y, yhat),
        r2=r2(y, yhat),
        error_histogram=error_distribution(y, yhat, n_bins, band, test.target_kind),
        importance=imp.values,
        feature_names=tuple(test.feature_names),
        n_test=test.n,
        importance_fallback=imp.fallback,
    )
    return report, yhat


@dataclass
class ComparisonTable:
    rows: list[tuple[str, float, float, float]] = field(default_factory=list)

    def best(self) -> str:
        return max(self.rows, key=lambda r: r[3])[0]

    def r2_of(self, kind: str) -> float:
        kind = canonical_kind(kind)
        for k, _, _, score in self.rows:
            if k == kind:
                return score
        raise KeyError(kind)

    def format(self, unit: str = "") -> str:
        head = f"{'model':<14} {'MSE' + unit:>14} {'RMSE':>10} {'R2':>8}"
        lines = [head, "-" * len(head)]
        for kind, m, rm, score in self.rows:
            lines.append(f"{kind:<14} {m:>14.4f} {rm:>10.4f} {score:>8.4f}")
        return "\n".join(lines)

    def to_list(self) -> list[dict]:
        return [{"model_kind": k, "mse": m, "rmse": rm, "r2": s} for k, m, rm, s in self.rows]


@dataclass
class Comparison:
    table: ComparisonTable
    reports: dict[str, EvalReport]
    models: dict[str, Model]
    predictions: dict[str, np.ndarray]
    test: FeatureMatrix

    def to_dict(self) -> dict:
        return {
            "target_kind": self.test.target_kind,
            "n_test": self.test.n,
            "table": self.table.to_list(),
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
        }


def compare_models(train: FeatureMatrix, test: FeatureMatrix, hypers: dict[str, HyperParams] | None = None,
                   kinds=MODEL_KINDS, n_jobs: int = 1, n_bins: int = 20, band: float | None = None) -> Comparison:
    """Fit every model kind on ``train`` and score it on the same ``test``
    rows. Rows come out in the order linear, tree, random_forest, xgb_style,
    lgbm_style regardless of the order of ``kinds``."""
    if tuple(train.feature_names) != tuple(test.feature_names) or train.target_kind != test.target_kind:
        raise SchemaMismatch("train and test matrices have different schemas")
    hypers = {canonical_kind(k): v for k, v in (hypers or {}).items()}
    wanted = {canonical_kind(k) for k in kinds}
    table = ComparisonTable()
    reports, models, preds = {}, {}, {}
    for kind in MODEL_KINDS:
        if kind not in wanted:
            continue
        model = fit_model(kind, train, hypers.get(kind), n_jobs=n_jobs)
        report, yhat = evaluate(model, test, n_bins, band)
        table.rows.append((kind, report.mse, report.rmse, report.r2))
        reports[kind], models[kind], preds[kind] = report, model, yhat
    return Comparison(table, reports, models, preds, test)


# ---------------------------------------------------------------------------
# plot-ready exports


def export_scatter(y, yhat, path) -> str:
    """Two-column ``actual,predicted`` CSV with full float precision."""
    y, yhat = _pair(y, yhat)
    path = os.fspath(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["actual", "predicted"])
            for a, b in zip(y.tolist(), yhat.tolist()):
                w.writerow([repr(a), repr(b)])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def read_scatter(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = np.loadtxt(os.fspath(path), delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return data[:, 0], data[:, 1]


def export_histogram(hist: ErrorHistogram, path) -> str:
    """One row per bin: ``bin_lo,bin_hi,count``."""
    path = os.fspath(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(hist.edges[:-1].tolist(), hist.edges[1:].tolist(), hist.counts.tolist()):
                w.writerow([repr(lo), repr(hi), c])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def write_json(obj: dict, path) -> str:
    path = os.fspath(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path
