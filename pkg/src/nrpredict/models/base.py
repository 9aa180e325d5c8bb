"""Fitted-model containers and the shared predict entry point."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaMismatch
from ..preprocess import ScalerParams, scale_rows
from . import _kernels
from .hyper import HyperParams


@dataclass(frozen=True)
class Tree:
    """Binary regression tree in flat-array form; node 0 is the root.

    Leaves have ``feature == -1`` and ``left == right == -1``. Internal nodes
    send ``x[feature] <= threshold`` to ``left``. ``gain`` is the split's
    loss reduction (0 on leaves) and ``n_samples`` the weighted number of
    training rows that reached the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        internal = self.feature[node] >= 0
        while internal.any():
            cur = node[internal]
            go_left = X[rows[internal], self.feature[cur]] <= self.threshold[cur]
            node[internal] = np.where(go_left, self.left[cur], self.right[cur])
            internal = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=np.float64))]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = {"feature", "left", "right"}
        arrs = {k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64)
                for k in ("feature", "threshold", "left", "right", "value", "gain", "n_samples")}
        n = arrs["feature"].shape[0]
        if n == 0 or any(a.shape != (n,) for a in arrs.values()):
            raise ValueError("tree arrays must be non-empty and of equal length")
        return cls(**arrs)


class TreeBuilder:
    """Append-only node store used by the growers."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self.n_samples: list[float] = []

    def add(self, value: float = 0.0, n_samples: float = 0.0) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(0.0)
        self.n_samples.append(n_samples)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, gain: float) -> tuple[int, int]:
        left, right = self.add(), self.add()
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.gain[node] = gain
        self.left[node] = left
        self.right[node] = right
        return left, right

    def build(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
            np.asarray(self.gain, dtype=np.float64),
            np.asarray(self.n_samples, dtype=np.float64),
        )


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    scaler: ScalerParams
    hyper: HyperParams = field(default_factory=HyperParams)
    target_kind: str | None = None
    singular: bool = False
    model_kind: str = "linear"


@dataclass
class TreeModel:
    tree: Tree
    scaler: ScalerParams
    hyper: HyperParams = field(default_factory=HyperParams)
    target_kind: str | None = None
    model_kind: str = "tree"


@dataclass
class EnsembleModel:
    """Bagged (``random_forest``) or boosted (``xgb_style``, ``lgbm_style``) trees.

    Forest prediction is the mean tree output; boosted prediction is
    ``base_score + sum_b learning_rate * tree_b(x)``.
    """

    model_kind: str
    trees: tuple[Tree, ...]
    scaler: ScalerParams
    hyper: HyperParams = field(default_factory=HyperParams)
    base_score: float = 0.0
    learning_rate: float = 1.0
    bins: tuple[np.ndarray, ...] | None = None
    target_kind: str | None = None
    _packed: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def packed(self) -> tuple:
        """All trees concatenated with global child indices, plus root offsets."""
        if self._packed is None:
            offsets, feats, thrs, lefts, rights, vals = [], [], [], [], [], []
            base = 0
            for t in self.trees:
                offsets.append(base)
                feats.append(t.feature)
                thrs.append(t.threshold)
                lefts.append(np.where(t.left >= 0, t.left + base, -1))
                rights.append(np.where(t.right >= 0, t.right + base, -1))
                vals.append(t.value)
                base += t.n_nodes
            cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt))
            self._packed = (cat(feats, np.int64), cat(thrs, np.float64), cat(lefts, np.int64),
                            cat(rights, np.int64), cat(vals, np.float64), np.asarray(offsets, dtype=np.int64))
        return self._packed


Model = LinearModel | TreeModel | EnsembleModel


def linear_response(Xs: np.ndarray, weights: np.ndarray, intercept: float) -> np.ndarray:
    # explicit column sweep: summation order must not depend on BLAS threading
    out = np.zeros(Xs.shape[0])
    for j in range(Xs.shape[1]):
        out += Xs[:, j] * weights[j]
    return out + intercept


def predict_scaled(model: Model, Xs: np.ndarray) -> np.ndarray:
    """Predict from features already transformed by ``model.scaler``."""
    Xs = np.ascontiguousarray(Xs, dtype=np.float64)
    if Xs.ndim != 2 or Xs.shape[1] != len(model.scaler.feature_names):
        raise SchemaMismatch(f"model expects {len(model.scaler.feature_names)} features, got shape {Xs.shape}")
    if isinstance(model, LinearModel):
        return linear_response(Xs, model.weights, model.intercept)
    if isinstance(model, TreeModel):
        return model.tree.predict(Xs)
    if not model.trees:
        return np.full(Xs.shape[0], model.base_score if model.model_kind != "random_forest" else 0.0)
    feat, thr, left, right, val, roots = model.packed()
    if model.model_kind == "random_forest":
        return _kernels.predict_trees(Xs, feat, thr, left, right, val, roots) / len(model.trees)
    return _kernels.predict_trees(Xs, feat, thr, left, right, val, roots,
                                  model.base_score, model.learning_rate)


def predict(model: Model, X, feature_names=None) -> np.ndarray:
    """Predict from raw (unscaled) features; the embedded scaler is applied here.

    ``feature_names``, when given, must equal the model's feature order.
    """
    if feature_names is not None and tuple(feature_names) != tuple(model.scaler.feature_names):
        raise SchemaMismatch(f"features {list(feature_names)} do not match model features "
                             f"{list(model.scaler.feature_names)}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return predict_scaled(model, scale_rows(X, model.scaler))
