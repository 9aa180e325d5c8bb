"""Exact greedy regression trees (CART and second-order level-wise growth)."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..preprocess import ScalerParams
from . import _kernels
from .base import Tree, TreeBuilder, TreeModel
from .hyper import HyperParams, default_hyper


def feature_orders(X: np.ndarray) -> np.ndarray:
    """(p, n) stable argsort of every column; ties keep row order."""
    X = np.asarray(X, dtype=np.float64)
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def grow_exact(
    X: np.ndarray,
    order: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    *,
    max_depth: int | None,
    min_leaf: int,
    lam: float = 0.0,
    scale: float = 1.0,
    center: bool = True,
    min_gain: float = 0.0,
    feature_sampler: Callable[[], np.ndarray] | None = None,
) -> tuple[Tree, np.ndarray]:
    """Grow one tree level by level on gradients ``g`` and hessians ``h``.

    Split gain is ``scale * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))``
    and leaf value ``-G/(H+lam)``, with sums weighted by ``w`` (bootstrap
    counts; zero-weight rows are carried along but ignored). With
    ``g = -y, h = 1, lam = 0, scale = 1`` this is CART: gain is the SSE
    reduction and the leaf value the mean target. ``center`` re-centres the
    gradients inside each node before scanning, which leaves the CART gain
    unchanged but keeps it accurate when targets carry a large offset.

    ``feature_sampler`` is called once per splittable node (in level order)
    and returns the feature indices that node may split on.

    Returns the tree and the leaf index of every training row.
    """
    n, p = X.shape
    depth_cap = math.inf if max_depth is None else max_depth
    builder = TreeBuilder()
    frontier = [builder.add()]
    node_of = np.zeros(n, dtype=np.int64)
    leaf_of = np.zeros(n, dtype=np.int64)
    depth = 0
    while frontier:
        F = len(frontier)
        g_raw, H, C, gg, G, Q = _kernels.node_totals(g, h, w, node_of, F, center)
        for k, node in enumerate(frontier):
            builder.value[node] = -g_raw[k] / (H[k] + lam) if H[k] + lam > 0 else 0.0
            builder.n_samples[node] = C[k]
        eligible = (C >= 2 * min_leaf) & (C > 0) if depth < depth_cap else np.zeros(F, dtype=bool)
        if not eligible.any():
            break
        allowed = np.zeros((F, p), dtype=np.bool_)
        for k in range(F):
            if eligible[k]:
                if feature_sampler is None:
                    allowed[k] = True
                else:
                    allowed[k, feature_sampler()] = True
        tol = _kernels.TIE_RTOL * Q
        gain, feat, thr = _kernels.level_scan(X, order, gg, h, w, node_of, allowed, G, H, C, tol,
                                              lam, scale, min_leaf)
        do_split = eligible & (feat >= 0) & (gain > np.maximum(min_gain, tol))
        left_id = np.full(F, -1, dtype=np.int64)
        right_id = np.full(F, -1, dtype=np.int64)
        nxt = []
        for k, node in enumerate(frontier):
            if do_split[k]:
                lnode, rnode = builder.split(node, int(feat[k]), float(thr[k]), float(gain[k]))
                left_id[k] = len(nxt)
                nxt.append(lnode)
                right_id[k] = len(nxt)
                nxt.append(rnode)
        act = np.flatnonzero(node_of >= 0)
        k_act = node_of[act]
        splitting = do_split[k_act]
        stop = act[~splitting]
        leaf_of[stop] = np.asarray(frontier, dtype=np.int64)[k_act[~splitting]]
        node_of[stop] = -1
        mov = act[splitting]
        k_mov = k_act[splitting]
        go_left = X[mov, feat[k_mov]] <= thr[k_mov]
        node_of[mov] = np.where(go_left, left_id[k_mov], right_id[k_mov])
        frontier = nxt
        depth += 1
    act = np.flatnonzero(node_of >= 0)
    if act.size:
        leaf_of[act] = np.asarray(frontier, dtype=np.int64)[node_of[act]]
    return builder.build(), leaf_of


def best_split(x_col, y, min_samples_leaf: int = 1) -> tuple[float, float] | None:
    """Best single-feature CART split of ``y`` on ``x_col``.

    Candidates are midpoints between consecutive distinct values of
    ``x_col``; the score is the SSE reduction. Ties go to the smallest
    threshold. Returns ``(threshold, sse_reduction)`` or ``None`` when no
    candidate reduces the SSE.
    """
    x = np.asarray(x_col, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n < 2 * min_samples_leaf:
        return None
    ones = np.ones(n)
    node_of = np.zeros(n, dtype=np.int64)
    _, H, C, gg, G, Q = _kernels.node_totals(-y, ones, ones, node_of, 1, True)
    tol = _kernels.TIE_RTOL * Q
    gain, feat, thr = _kernels.level_scan(x, feature_orders(x), gg, ones, ones, node_of,
                                          np.ones((1, 1), dtype=np.bool_), G, H, C, tol,
                                          0.0, 1.0, min_samples_leaf)
    if feat[0] < 0 or not gain[0] > tol[0]:
        return None
    return float(thr[0]), float(gain[0])


def fit_tree(X, y, hyper: HyperParams | None = None, *, scaler: ScalerParams | None = None,
             target_kind: str | None = None) -> TreeModel:
    """CART regression tree: greedy SSE-reduction splits, leaf = mean target.

    ``X`` is taken as already scaled by ``scaler`` (identity when omitted);
    growth stops at ``max_depth``, when a child would hold fewer than
    ``min_samples_leaf`` rows, or when no split reduces the SSE.
    """
    hyper = (hyper or default_hyper("tree")).validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    ones = np.ones(n)
    tree, _ = grow_exact(X, feature_orders(X), -y, ones, ones, max_depth=hyper.max_depth,
                         min_leaf=hyper.min_samples_leaf, min_gain=hyper.min_split_gain)
    scaler = scaler or ScalerParams.identity([f"x{j}" for j in range(X.shape[1])])
    return TreeModel(tree, scaler, hyper, target_kind)
