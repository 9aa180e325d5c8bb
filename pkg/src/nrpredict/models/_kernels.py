"""Hot loops of the tree learners.

Each kernel exists twice: a scalar loop compiled by numba and a NumPy
formulation used when numba is disabled. Both accumulate every sum in the
same order (index order for node totals, sorted order for prefix sums,
sequential ``np.cumsum``/``np.bincount`` on the NumPy side) and evaluate the
gain with the same expression, so the two backends produce bit-identical
trees.

Candidate selection is two-pass: find the node's maximal gain, then take the
first candidate (feature ascending, threshold ascending) whose gain is within
``TIE_RTOL * Q`` of it, where ``Q`` is the node's weighted sum of squared
gradients. Gains that differ only by rounding are thereby treated as ties.
"""
from __future__ import annotations

import numpy as np

from .. import _accel

TIE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# node totals


def _node_totals_loop(g, h, w, node_of, n_nodes, center):
    g_raw = np.zeros(n_nodes)
    H = np.zeros(n_nodes)
    C = np.zeros(n_nodes)
    for i in range(g.shape[0]):
        k = node_of[i]
        if k < 0:
            continue
        g_raw[k] += w[i] * g[i]
        H[k] += w[i] * h[i]
        C[k] += w[i]
    gg = np.empty(g.shape[0])
    for i in range(g.shape[0]):
        k = node_of[i]
        if k >= 0 and center and C[k] > 0:
            gg[i] = g[i] - g_raw[k] / C[k]
        else:
            gg[i] = g[i]
    G = np.zeros(n_nodes)
    Q = np.zeros(n_nodes)
    for i in range(g.shape[0]):
        k = node_of[i]
        if k < 0:
            continue
        wg = w[i] * gg[i]
        G[k] += wg
        Q[k] += wg * gg[i]
    return g_raw, H, C, gg, G, Q


def _node_totals_np(g, h, w, node_of, n_nodes, center):
    act = node_of >= 0
    k = node_of[act]
    g_raw = np.bincount(k, weights=w[act] * g[act], minlength=n_nodes)
    H = np.bincount(k, weights=w[act] * h[act], minlength=n_nodes)
    C = np.bincount(k, weights=w[act], minlength=n_nodes)
    gg = g.copy()
    if center:
        mean = np.zeros(n_nodes)
        np.divide(g_raw, C, out=mean, where=C > 0)
        sub = act.copy()
        sub[act] = C[k] > 0
        gg[sub] = g[sub] - mean[node_of[sub]]
    wg = w[act] * gg[act]
    G = np.bincount(k, weights=wg, minlength=n_nodes)
    Q = np.bincount(k, weights=wg * gg[act], minlength=n_nodes)
    return g_raw, H, C, gg, G, Q


# ---------------------------------------------------------------------------
# exact level-wise split search


def _level_scan_loop(X, order, gg, h, w, node_of, allowed, G, H, C, tol, lam, scale, min_leaf):
    n, p = X.shape
    n_nodes = G.shape[0]
    parent = G * G / (H + lam)
    best = np.full(n_nodes, -np.inf)
    for rnd in range(2):
        done = np.zeros(n_nodes, dtype=np.bool_)
        out_gain = np.full(n_nodes, -np.inf)
        out_feat = np.full(n_nodes, -1, dtype=np.int64)
        out_thr = np.zeros(n_nodes)
        for j in range(p):
            GL = np.zeros(n_nodes)
            HL = np.zeros(n_nodes)
            CL = np.zeros(n_nodes)
            last = np.zeros(n_nodes)
            seen = np.zeros(n_nodes, dtype=np.bool_)
            for t in range(n):
                i = order[j, t]
                k = node_of[i]
                if k < 0 or w[i] == 0.0 or not allowed[k, j]:
                    continue
                x = X[i, j]
                if seen[k] and x > last[k]:
                    cl = CL[k]
                    if cl >= min_leaf and C[k] - cl >= min_leaf:
                        gl = GL[k]
                        hl = HL[k]
                        gr = G[k] - gl
                        hr = H[k] - hl
                        gain = scale * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[k])
                        if rnd == 0:
                            if gain > best[k]:
                                best[k] = gain
                        elif not done[k] and gain >= best[k] - tol[k]:
                            done[k] = True
                            out_gain[k] = gain
                            out_feat[k] = j
                            mid = 0.5 * (last[k] + x)
                            out_thr[k] = last[k] if mid >= x else mid
                GL[k] += w[i] * gg[i]
                HL[k] += w[i] * h[i]
                CL[k] += w[i]
                last[k] = x
                seen[k] = True
    return out_gain, out_feat, out_thr


def _level_scan_np(X, order, gg, h, w, node_of, allowed, G, H, C, tol, lam, scale, min_leaf):
    n, p = X.shape
    n_nodes = G.shape[0]
    parent = G * G / (H + lam)
    cands = [[] for _ in range(n_nodes)]  # per node: (gain array, feature, thresholds)
    for j in range(p):
        seq = order[j]
        k_seq = node_of[seq]
        keep = k_seq >= 0
        keep[keep] = (w[seq[keep]] != 0.0) & allowed[k_seq[keep], j]
        seq = seq[keep]
        k_seq = k_seq[keep]
        grouped = np.argsort(k_seq, kind="stable")
        seq = seq[grouped]
        k_seq = k_seq[grouped]
        bounds = np.flatnonzero(np.diff(k_seq)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [seq.size]))
        for s, e in zip(starts, ends):
            if e - s < 2:
                continue
            idx = seq[s:e]
            k = int(k_seq[s])
            x = X[idx, j]
            cut = np.flatnonzero(x[1:] > x[:-1])  # left part = idx[:cut+1]
            if cut.size == 0:
                continue
            GL = np.cumsum(w[idx] * gg[idx])[cut]
            HL = np.cumsum(w[idx] * h[idx])[cut]
            CL = np.cumsum(w[idx])[cut]
            ok = (CL >= min_leaf) & (C[k] - CL >= min_leaf)
            if not ok.any():
                continue
            cut, GL, HL = cut[ok], GL[ok], HL[ok]
            GR = G[k] - GL
            HR = H[k] - HL
            gain = scale * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent[k])
            a, b = x[cut], x[cut + 1]
            mid = 0.5 * (a + b)
            thr = np.where(mid >= b, a, mid)
            cands[k].append((gain, j, thr))
    out_gain = np.full(n_nodes, -np.inf)
    out_feat = np.full(n_nodes, -1, dtype=np.int64)
    out_thr = np.zeros(n_nodes)
    for k in range(n_nodes):
        if not cands[k]:
            continue
        best = max(float(c[0].max()) for c in cands[k])
        for gain, j, thr in cands[k]:
            hit = np.flatnonzero(gain >= best - tol[k])
            if hit.size:
                out_gain[k] = gain[hit[0]]
                out_feat[k] = j
                out_thr[k] = thr[hit[0]]
                break
    return out_gain, out_feat, out_thr


# ---------------------------------------------------------------------------
# histograms


def _hist_loop(codes, g, h, idx, n_bins):
    p = codes.shape[1]
    out = np.zeros((p, n_bins, 3))
    for t in range(idx.shape[0]):
        i = idx[t]
        for j in range(p):
            b = codes[i, j]
            out[j, b, 0] += g[i]
            out[j, b, 1] += h[i]
            out[j, b, 2] += 1.0
    return out


def _hist_np(codes, g, h, idx, n_bins):
    p = codes.shape[1]
    out = np.zeros((p, n_bins, 3))
    gi, hi = g[idx], h[idx]
    for j in range(p):
        c = codes[idx, j]
        out[j, :, 0] = np.bincount(c, weights=gi, minlength=n_bins)
        out[j, :, 1] = np.bincount(c, weights=hi, minlength=n_bins)
        out[j, :, 2] = np.bincount(c, minlength=n_bins)
    return out


def _hist_split_loop(hist, n_cand, G, H, C, tol, lam, scale, min_leaf):
    p = hist.shape[0]
    parent = G * G / (H + lam)
    best = -np.inf
    out_gain, out_feat, out_bin = -np.inf, -1, -1
    for rnd in range(2):
        for j in range(p):
            GL = 0.0
            HL = 0.0
            CL = 0.0
            for b in range(n_cand[j]):
                GL += hist[j, b, 0]
                HL += hist[j, b, 1]
                CL += hist[j, b, 2]
                if hist[j, b, 2] == 0.0 or CL < min_leaf or C - CL < min_leaf:
                    continue
                GR = G - GL
                HR = H - HL
                gain = scale * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
                if rnd == 0:
                    if gain > best:
                        best = gain
                elif gain >= best - tol:
                    return gain, j, b
    return out_gain, out_feat, out_bin


def _hist_split_np(hist, n_cand, G, H, C, tol, lam, scale, min_leaf):
    parent = G * G / (H + lam)
    found = []
    for j in range(hist.shape[0]):
        m = int(n_cand[j])
        if m == 0:
            continue
        GL = np.cumsum(hist[j, :m, 0])
        HL = np.cumsum(hist[j, :m, 1])
        CL = np.cumsum(hist[j, :m, 2])
        ok = (hist[j, :m, 2] != 0.0) & (CL >= min_leaf) & (C - CL >= min_leaf)
        bins = np.flatnonzero(ok)
        if bins.size == 0:
            continue
        GL, HL = GL[bins], HL[bins]
        GR = G - GL
        HR = H - HL
        found.append((scale * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent), j, bins))
    if not found:
        return -np.inf, -1, -1
    best = max(float(f[0].max()) for f in found)
    for gain, j, bins in found:
        hit = np.flatnonzero(gain >= best - tol)
        if hit.size:
            return float(gain[hit[0]]), j, int(bins[hit[0]])
    return -np.inf, -1, -1  # pragma: no cover


# ---------------------------------------------------------------------------
# prediction over concatenated trees


def _predict_loop(X, feature, threshold, left, right, value, roots, init, scale):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = init
        for r in range(roots.shape[0]):
            node = roots[r]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += scale * value[node]
        out[i] = acc
    return out


def _predict_np(X, feature, threshold, left, right, value, roots, init, scale, chunk=4096):
    # all trees walk in lockstep; cumsum adds tree outputs in tree order, as the loop does
    n = X.shape[0]
    out = np.empty(n)
    for lo in range(0, n, chunk):
        Xc = X[lo:lo + chunk]
        m = Xc.shape[0]
        node = np.broadcast_to(roots, (m, roots.shape[0])).copy()
        rows = np.broadcast_to(np.arange(m)[:, None], node.shape)
        internal = feature[node] >= 0
        while internal.any():
            cur = node[internal]
            go_left = Xc[rows[internal], feature[cur]] <= threshold[cur]
            node[internal] = np.where(go_left, left[cur], right[cur])
            internal = feature[node] >= 0
        terms = np.empty((m, roots.shape[0] + 1))
        terms[:, 0] = init
        terms[:, 1:] = scale * value[node]
        out[lo:lo + m] = np.cumsum(terms, axis=1)[:, -1]
    return out


_jit = {
    "node_totals": _accel.jit(_node_totals_loop),
    "level_scan": _accel.jit(_level_scan_loop),
    "hist": _accel.jit(_hist_loop),
    "hist_split": _accel.jit(_hist_split_loop),
    # keeps the GIL: single-row calls are microseconds long, and releasing the
    # GIL there lets a busy producer thread delay the caller by a scheduler slice
    "predict": _accel.jit(_predict_loop, nogil=False),
}


def node_totals(g, h, w, node_of, n_nodes: int, center: bool):
    """Per-node sums in index order.

    Returns ``(g_raw, H, C, gg, G, Q)``: raw gradient sum, hessian sum and
    weight sum per node, the (optionally node-centred) gradients ``gg``, and
    the weighted sum and sum of squares of ``gg`` per node.
    """
    if _accel.use_numba():
        return _jit["node_totals"](g, h, w, node_of, n_nodes, center)
    return _node_totals_np(g, h, w, node_of, n_nodes, center)


def level_scan(X, order, gg, h, w, node_of, allowed, G, H, C, tol, lam: float, scale: float, min_leaf: float):
    """Best exact split for every active node of one tree level.

    Returns ``(gain, feature, threshold)`` arrays; ``feature == -1`` marks
    nodes without a feasible candidate.
    """
    fn = _jit["level_scan"] if _accel.use_numba() else _level_scan_np
    return fn(X, order, gg, h, w, node_of, allowed, G, H, C, tol, float(lam), float(scale), float(min_leaf))


def histogram(codes, g, h, idx, n_bins: int):
    """(p, n_bins, 3) array of per-bin gradient sum, hessian sum and count."""
    fn = _jit["hist"] if _accel.use_numba() else _hist_np
    return fn(codes, g, h, idx, n_bins)


def hist_split(hist, n_cand, G: float, H: float, C: float, tol: float, lam: float, scale: float, min_leaf: float):
    """Best histogram split ``(gain, feature, bin)``; left side is ``code <= bin``."""
    fn = _jit["hist_split"] if _accel.use_numba() else _hist_split_np
    gain, j, b = fn(hist, n_cand, float(G), float(H), float(C), float(tol), float(lam), float(scale), float(min_leaf))
    return float(gain), int(j), int(b)


def predict_trees(X, feature, threshold, left, right, value, roots, init: float = 0.0, scale: float = 1.0):
    """``init + sum_r scale * tree_r(x)`` per row, trees accumulated in order."""
    fn = _jit["predict"] if _accel.use_numba() else _predict_np
    return fn(np.ascontiguousarray(X, dtype=np.float64), feature, threshold, left, right, value,
              roots, float(init), float(scale))
