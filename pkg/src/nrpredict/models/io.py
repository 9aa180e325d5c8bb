"""Versioned JSON model files."""
from __future__ import annotations

import json
import os

import numpy as np

from ..errors import IoError, SchemaMismatch, UnknownFormatVersion
from ..preprocess import ScalerParams
from .base import EnsembleModel, LinearModel, Model, Tree, TreeModel
from .hyper import HyperParams, canonical_kind
from .importance import importance_dict

FORMAT_VERSION = 1


def model_to_dict(model: Model) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.model_kind,
        "target_kind": model.target_kind,
        "hyper": model.hyper.to_dict(),
        "scaler": model.scaler.to_dict(),
    }
    if isinstance(model, LinearModel):
        d["weights"] = [float(v) for v in model.weights]
        d["intercept"] = float(model.intercept)
        d["singular"] = bool(model.singular)
        d["base_score"] = 0.0
    elif isinstance(model, TreeModel):
        d["trees"] = [model.tree.to_dict()]
        d["base_score"] = 0.0
    else:
        d["trees"] = [t.to_dict() for t in model.trees]
        d["base_score"] = float(model.base_score)
        d["learning_rate"] = float(model.learning_rate)
        if model.bins is not None:
            d["bins"] = [e.tolist() for e in model.bins]
    d["importance"] = importance_dict(model)
    return d


def model_from_dict(d: dict) -> Model:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise UnknownFormatVersion(f"model format_version {version!r} is not supported (expected {FORMAT_VERSION})")
    try:
        kind = canonical_kind(d["model_kind"])
        hyper = HyperParams.from_dict(d["hyper"])
        scaler = ScalerParams.from_dict(d["scaler"])
        target = d.get("target_kind")
        if kind == "linear":
            w = np.asarray(d["weights"], dtype=np.float64)
            if w.shape != (len(scaler.feature_names),):
                raise SchemaMismatch("weight count does not match scaler features")
            return LinearModel(w, float(d["intercept"]), scaler, hyper, target, bool(d.get("singular", False)))
        trees = tuple(Tree.from_dict(t) for t in d["trees"])
        if kind == "tree":
            if len(trees) != 1:
                raise SchemaMismatch("tree model must hold exactly one tree")
            return TreeModel(trees[0], scaler, hyper, target)
        bins = tuple(np.asarray(e, dtype=np.float64) for e in d["bins"]) if d.get("bins") is not None else None
        return EnsembleModel(kind, trees, scaler, hyper, float(d["base_score"]),
                             float(d.get("learning_rate", 1.0)), bins, target)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed model file: {exc}") from None


def dumps_model(model: Model) -> str:
    # sorted keys and repr floats: identical models give identical bytes
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def save_model(model: Model, path) -> str:
    path = os.fspath(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_model(model))
    except OSError as exc:
        raise IoError(f"cannot write model to {path}: {exc.strerror or exc}") from None
    return path


def load_model(path) -> Model:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"model file {path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise SchemaMismatch(f"model file {path} does not hold a JSON object")
    return model_from_dict(d)
