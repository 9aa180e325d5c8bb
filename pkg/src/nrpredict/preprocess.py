"""Data conditioning: target outlier clipping, seeded train/test split and
z-score scaling fitted on the training rows only."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SchemaMismatch, TooFewSamples
from .ingest import FeatureMatrix
from .rng import PortableRNG

MIN_SPLIT_ROWS = 5


class OutlierResult(NamedTuple):
    matrix: FeatureMatrix
    kept: np.ndarray
    capped: bool
    degenerate: bool


def remove_outliers(matrix: FeatureMatrix, z_threshold: float = 3.0, max_fraction: float = 0.1) -> OutlierResult:
    """Drop rows whose target lies more than ``z_threshold`` population
    standard deviations from the target mean.

    The rule is re-applied to the surviving rows until nothing more is
    dropped, so the output is a fixed point. At most ``floor(max_fraction*n)``
    rows are removed; if the rule asks for more, the rows closest to the
    original mean are kept instead and ``capped`` is set. A constant target
    is returned unchanged with ``degenerate`` set.
    """
    if z_threshold <= 0:
        raise ConfigError("z_threshold must be positive")
    n = matrix.n
    if n == 0:
        raise TooFewSamples("cannot clip outliers of an empty matrix")
    y = matrix.target
    all_idx = np.arange(n)
    if float(np.std(y)) == 0.0:
        return OutlierResult(matrix, all_idx, False, True)

    kept = all_idx
    while kept.size:
        t = y[kept]
        mu, sd = float(np.mean(t)), float(np.std(t))
        if sd == 0.0:
            break
        ok = np.abs(t - mu) <= z_threshold * sd
        if ok.all():
            break
        kept = kept[ok]

    budget = int(math.floor(max_fraction * n))
    capped = n - kept.size > budget
    if capped:
        dev = np.abs(y - float(np.mean(y)))
        order = np.lexsort((all_idx, dev))  # by deviation, then row index
        kept = np.sort(order[: n - budget])
    return OutlierResult(matrix.take(kept), kept, capped, False)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")


def split_indices(n: int, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Index partition for :func:`train_test_split`.

    The train part has ``round(n * train_fraction)`` rows (half up). With
    ``shuffle`` the order is a seeded permutation, otherwise the original
    row order (a time-ordered split for time-sorted data).
    """
    if n < MIN_SPLIT_ROWS:
        raise TooFewSamples(f"need at least {MIN_SPLIT_ROWS} rows to split, got {n}")
    k = int(math.floor(n * spec.train_fraction + 0.5))
    if k == 0 or k == n:
        raise TooFewSamples(f"train_fraction {spec.train_fraction} leaves an empty part for n={n}")
    order = PortableRNG(spec.seed).permutation(n) if spec.shuffle else np.arange(n, dtype=np.int64)
    return order[:k], order[k:]


def train_test_split(matrix: FeatureMatrix, spec: SplitSpec = SplitSpec()) -> tuple[FeatureMatrix, FeatureMatrix]:
    train_idx, test_idx = split_indices(matrix.n, spec)
    return matrix.take(train_idx), matrix.take(test_idx)


@dataclass(frozen=True)
class ScalerParams:
    means: tuple[float, ...]
    stds: tuple[float, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if not len(self.means) == len(self.stds) == len(self.feature_names):
            raise SchemaMismatch("scaler means, stds and names differ in length")

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "means": list(self.means), "stds": list(self.stds)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(tuple(float(v) for v in d["means"]), tuple(float(v) for v in d["stds"]),
                   tuple(d["feature_names"]))

    @classmethod
    def identity(cls, feature_names) -> "ScalerParams":
        p = len(feature_names)
        return cls((0.0,) * p, (1.0,) * p, tuple(feature_names))


def fit_scaler(train: FeatureMatrix) -> ScalerParams:
    """Per-column mean and population standard deviation of ``train``."""
    if train.n == 0:
        raise TooFewSamples("cannot fit a scaler on zero rows")
    means = train.rows.mean(axis=0)
    stds = train.rows.std(axis=0)
    return ScalerParams(tuple(float(v) for v in means), tuple(float(v) for v in stds), train.feature_names)


def scale_rows(rows: np.ndarray, params: ScalerParams) -> np.ndarray:
    """``(x - mean) / std`` per column; zero-variance columns become 0."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(params.means):
        raise SchemaMismatch(f"expected {len(params.means)} feature columns, got shape {rows.shape}")
    mu = np.asarray(params.means)
    sd = np.asarray(params.stds)
    safe = np.where(sd > 0.0, sd, 1.0)
    return np.where(sd > 0.0, (rows - mu) / safe, 0.0)


def apply_scaler(matrix: FeatureMatrix, params: ScalerParams) -> FeatureMatrix:
    if tuple(matrix.feature_names) != tuple(params.feature_names):
        raise SchemaMismatch(f"matrix features {list(matrix.feature_names)} do not match "
                             f"scaler features {list(params.feature_names)}")
    return matrix.with_rows(scale_rows(matrix.rows, params))


def prepare(matrix: FeatureMatrix, spec: SplitSpec = SplitSpec(), z_threshold: float = 3.0,
            max_fraction: float = 0.1) -> tuple[FeatureMatrix, FeatureMatrix, OutlierResult]:
    """Outlier clipping followed by the train/test split (scaling happens at fit time)."""
    clipped = remove_outliers(matrix, z_threshold, max_fraction)
    train, test = train_test_split(clipped.matrix, spec)
    return train, test, clipped
