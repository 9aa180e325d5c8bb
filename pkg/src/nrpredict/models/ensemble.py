"""Bagged forests and the two second-order boosting variants."""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..preprocess import ScalerParams
from ..rng import PortableRNG
from . import _kernels
from .base import EnsembleModel, Tree, TreeBuilder
from .hyper import HyperParams, default_hyper
from .tree import feature_orders, grow_exact


def _identity_scaler(X) -> ScalerParams:
    return ScalerParams.identity([f"x{j}" for j in range(np.shape(X)[1])])


def subsample_size(p: int, fraction: float | None) -> int:
    """Features examined per split: ceil(p * fraction), default fraction 1/3, at least 1."""
    if fraction is None:
        return max(1, -(-p // 3))
    return max(1, min(p, math.ceil(p * fraction - 1e-12)))


# ---------------------------------------------------------------------------
# random forest


def _forest_tree(X, order, y, hyper: HyperParams, b: int, bootstrap: bool) -> Tree:
    n, p = X.shape
    rng = PortableRNG(hyper.seed ^ b)
    if bootstrap:
        w = np.bincount(rng.integers(n, size=n), minlength=n).astype(np.float64)
    else:
        w = np.ones(n)
    k = subsample_size(p, hyper.feature_subsample)
    sampler = None if k == p else (lambda: rng.choice_subset(p, k))
    tree, _ = grow_exact(X, order, -y, np.ones(n), w, max_depth=hyper.max_depth,
                         min_leaf=hyper.min_samples_leaf, min_gain=hyper.min_split_gain,
                         feature_sampler=sampler)
    return tree


def fit_forest(X, y, hyper: HyperParams | None = None, *, scaler: ScalerParams | None = None,
               target_kind: str | None = None, n_jobs: int = 1, bootstrap: bool = True) -> EnsembleModel:
    """Random forest of CART trees.

    Tree ``b`` draws its bootstrap sample and per-split feature subsets from
    its own stream ``PortableRNG(seed ^ b)``, so the result does not depend on
    ``n_jobs`` or on the order in which workers finish. ``bootstrap=False``
    trains every tree on the full sample.
    """
    hyper = (hyper or default_hyper("random_forest")).validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    order = feature_orders(X)
    if n_jobs > 1 and hyper.n_trees > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda b: _forest_tree(X, order, y, hyper, b, bootstrap), range(hyper.n_trees)))
    else:
        trees = [_forest_tree(X, order, y, hyper, b, bootstrap) for b in range(hyper.n_trees)]
    return EnsembleModel("random_forest", tuple(trees), scaler or _identity_scaler(X), hyper,
                         base_score=0.0, learning_rate=1.0, target_kind=target_kind)


# ---------------------------------------------------------------------------
# squared-loss boosting


def squared_loss_gradients(F: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and hessian of ``0.5 * (y - F)^2`` with respect to ``F``."""
    return F - y, np.ones_like(F)


def fit_xgb_style(X, y, hyper: HyperParams | None = None, *, scaler: ScalerParams | None = None,
                  target_kind: str | None = None, base_score: float | None = None,
                  history: list | None = None) -> EnsembleModel:
    """Gradient boosting with exact level-wise trees and L2-regularised leaves.

    Each round fits a tree to the squared-loss gradients of the current
    predictions. ``base_score`` defaults to ``mean(y)``. When ``history`` is a
    list, the training predictions after every round are appended to it.
    """
    hyper = (hyper or default_hyper("xgb_style")).validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    base = float(np.mean(y)) if base_score is None else float(base_score)
    order = feature_orders(X)
    ones = np.ones(n)
    F = np.full(n, base)
    trees = []
    for _ in range(hyper.n_trees):
        g, h = squared_loss_gradients(F, y)
        tree, leaf_of = grow_exact(X, order, g, h, ones, max_depth=hyper.max_depth,
                                   min_leaf=hyper.min_samples_leaf, lam=hyper.reg_lambda, scale=0.5,
                                   center=False, min_gain=hyper.min_split_gain)
        F = F + hyper.learning_rate * tree.value[leaf_of]
        trees.append(tree)
        if history is not None:
            history.append(F.copy())
    return EnsembleModel("xgb_style", tuple(trees), scaler or _identity_scaler(X), hyper,
                         base_score=base, learning_rate=hyper.learning_rate, target_kind=target_kind)


def _midpoint(a: float, b: float) -> float:
    m = 0.5 * (a + b)
    return a if m >= b else m


def bin_edges(x, n_bins: int = 255) -> np.ndarray:
    """Quantile bin edges for one feature; bin ``b`` holds ``edges[b-1] < x <= edges[b]``.

    With at most ``n_bins`` distinct values every gap between neighbours gets
    an edge, so binning loses nothing. Otherwise the edges sit at the
    ``k/n_bins`` sample quantiles, each moved down to the midpoint with the
    next smaller distinct value so that equal values never straddle an edge.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.unique(x)
    if u.size <= 1:
        return np.zeros(0)
    if u.size <= n_bins:
        return np.array([_midpoint(a, b) for a, b in zip(u[:-1], u[1:])])
    xs = np.sort(x)
    n = xs.size
    edges = []
    for k in range(1, n_bins):
        q = xs[(k * n) // n_bins]
        pos = int(np.searchsorted(u, q, side="left"))
        if pos == 0:
            continue
        edges.append(_midpoint(u[pos - 1], q))
    return np.unique(np.asarray(edges))


def bin_codes(X, edges: tuple[np.ndarray, ...]) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    codes = np.empty(X.shape, dtype=np.int64)
    for j, e in enumerate(edges):
        codes[:, j] = np.searchsorted(e, X[:, j], side="left")
    return codes


def grow_leafwise(codes, edges, g, h, *, max_leaves: int, max_depth: int | None, min_leaf: int,
                  lam: float, min_gain: float) -> tuple[Tree, np.ndarray]:
    """Best-first tree on binned features.

    The leaf with the largest split gain is expanded next (equal gains go to
    the leftmost leaf) until ``max_leaves`` leaves exist or no leaf has a
    split with positive gain. Only the smaller child's histogram is built
    from rows; the larger one is the parent's minus the smaller.
    """
    n = g.shape[0]
    n_cand = np.array([e.size for e in edges], dtype=np.int64)
    width = int(n_cand.max()) + 1 if n_cand.size else 1
    depth_cap = math.inf if max_depth is None else max_depth
    builder = TreeBuilder()
    heap: list = []

    def open_leaf(node, idx, hist, depth, path):
        G, H = float(g[idx].sum()), float(h[idx].sum())
        builder.value[node] = -G / (H + lam) if H + lam > 0 else 0.0
        builder.n_samples[node] = float(idx.size)
        if depth >= depth_cap or idx.size < 2 * min_leaf:
            return
        tol = _kernels.TIE_RTOL * float(np.dot(g[idx], g[idx]))
        gain, j, b = _kernels.hist_split(hist, n_cand, G, H, float(idx.size), tol, lam, 0.5, min_leaf)
        if j >= 0 and gain > max(min_gain, tol):
            heapq.heappush(heap, (-gain, path, node, idx, hist, depth, j, b))

    root_idx = np.arange(n, dtype=np.int64)
    root = builder.add()
    open_leaf(root, root_idx, _kernels.histogram(codes, g, h, root_idx, width), 0, ())
    leaves = {root: root_idx}
    while heap and len(leaves) < max_leaves:
        neg_gain, path, node, idx, hist, depth, j, b = heapq.heappop(heap)
        go_left = codes[idx, j] <= b
        li, ri = idx[go_left], idx[~go_left]
        lnode, rnode = builder.split(node, j, float(edges[j][b]), -neg_gain)
        if li.size <= ri.size:
            lh = _kernels.histogram(codes, g, h, li, width)
            rh = hist - lh
        else:
            rh = _kernels.histogram(codes, g, h, ri, width)
            lh = hist - rh
        del leaves[node]
        leaves[lnode], leaves[rnode] = li, ri
        open_leaf(lnode, li, lh, depth + 1, path + (0,))
        open_leaf(rnode, ri, rh, depth + 1, path + (1,))
    leaf_of = np.empty(n, dtype=np.int64)
    for node, idx in leaves.items():
        leaf_of[idx] = node
    return builder.build(), leaf_of


def fit_lgbm_style(X, y, hyper: HyperParams | None = None, *, scaler: ScalerParams | None = None,
                   target_kind: str | None = None, base_score: float | None = None,
                   history: list | None = None) -> EnsembleModel:
    """Gradient boosting with histogram binning and leaf-wise (best-first) trees.

    Features are binned once on the training rows; split thresholds are bin
    edges, so raw features can be fed at prediction time.
    """
    hyper = (hyper or default_hyper("lgbm_style")).validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    base = float(np.mean(y)) if base_score is None else float(base_score)
    edges = tuple(bin_edges(X[:, j], hyper.n_bins) for j in range(X.shape[1]))
    codes = bin_codes(X, edges)
    F = np.full(n, base)
    trees = []
    for _ in range(hyper.n_trees):
        g, h = squared_loss_gradients(F, y)
        tree, leaf_of = grow_leafwise(codes, edges, g, h, max_leaves=hyper.max_leaves,
                                      max_depth=hyper.max_depth, min_leaf=hyper.min_samples_leaf,
                                      lam=hyper.reg_lambda, min_gain=hyper.min_split_gain)
        F = F + hyper.learning_rate * tree.value[leaf_of]
        trees.append(tree)
        if history is not None:
            history.append(F.copy())
    return EnsembleModel("lgbm_style", tuple(trees), scaler or _identity_scaler(X), hyper,
                         base_score=base, learning_rate=hyper.learning_rate, bins=edges,
                         target_kind=target_kind)
