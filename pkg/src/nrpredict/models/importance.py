from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .base import EnsembleModel, LinearModel, Model, TreeModel


class Importance(NamedTuple):
    values: np.ndarray
    fallback: bool
    note: str


def feature_importance(model: Model) -> Importance:
    """Normalised per-feature importance.

    Tree models sum the split gains of every tree per feature. The linear
    model uses ``|w| / sum|w|`` on standardised features, which measures
    sensitivity rather than loss reduction. When nothing contributes (no
    splits, all-zero weights) the uniform vector is returned with
    ``fallback`` set.
    """
    p = len(model.scaler.feature_names)
    if isinstance(model, LinearModel):
        raw = np.abs(np.asarray(model.weights, dtype=np.float64))
        note = "absolute standardised coefficients"
    else:
        trees = (model.tree,) if isinstance(model, TreeModel) else model.trees
        raw = np.zeros(p)
        for t in trees:
            split = t.feature >= 0
            raw += np.bincount(t.feature[split], weights=t.gain[split], minlength=p)
        note = "summed split gain"
    total = float(raw.sum())
    if not total > 0.0 or not np.isfinite(total):
        return Importance(np.full(p, 1.0 / p), True, "no contributing feature; uniform fallback")
    return Importance(raw / total, False, note)


def importance_dict(model: Model) -> dict:
    imp = feature_importance(model)
    return {
        "features": list(model.scaler.feature_names),
        "values": imp.values.tolist(),
        "fallback": imp.fallback,
        "note": imp.note,
    }


__all__ = ["Importance", "feature_importance", "importance_dict", "EnsembleModel"]
