"""From-scratch regressors sharing one fit/predict/importance contract."""
from __future__ import annotations

from ..ingest import FeatureMatrix
from ..preprocess import fit_scaler, scale_rows
from .base import EnsembleModel, LinearModel, Model, Tree, TreeModel, predict, predict_scaled
from .ensemble import bin_codes, bin_edges, fit_forest, fit_lgbm_style, fit_xgb_style, grow_leafwise
from .hyper import MODEL_KINDS, HyperParams, canonical_kind, default_hyper
from .importance import Importance, feature_importance
from .io import FORMAT_VERSION, dumps_model, load_model, model_from_dict, model_to_dict, save_model
from .linear import fit_linear
from .tree import best_split, fit_tree, grow_exact

_FITTERS = {
    "linear": fit_linear,
    "tree": fit_tree,
    "random_forest": fit_forest,
    "xgb_style": fit_xgb_style,
    "lgbm_style": fit_lgbm_style,
}


def fit_model(kind: str, train: FeatureMatrix, hyper: HyperParams | None = None, n_jobs: int = 1) -> Model:
    """Fit a z-score scaler on ``train``, then the ``kind`` regressor on the
    scaled rows. The scaler travels inside the model, so :func:`predict`
    takes raw features."""
    kind = canonical_kind(kind)
    hyper = hyper or default_hyper(kind)
    scaler = fit_scaler(train)
    Xs = scale_rows(train.rows, scaler)
    extra = {"n_jobs": n_jobs} if kind == "random_forest" else {}
    return _FITTERS[kind](Xs, train.target, hyper, scaler=scaler, target_kind=train.target_kind, **extra)


__all__ = [
    "MODEL_KINDS", "FORMAT_VERSION", "HyperParams", "Importance", "Model", "Tree",
    "LinearModel", "TreeModel", "EnsembleModel",
    "best_split", "bin_codes", "bin_edges", "canonical_kind", "default_hyper", "dumps_model",
    "feature_importance", "fit_forest", "fit_lgbm_style", "fit_linear", "fit_model",
    "fit_tree", "fit_xgb_style", "grow_exact", "grow_leafwise", "load_model",
    "model_from_dict", "model_to_dict", "predict", "predict_scaled", "save_model",
]
