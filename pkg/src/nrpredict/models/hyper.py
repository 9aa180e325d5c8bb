from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

MODEL_KINDS = ("linear", "tree", "random_forest", "xgb_style", "lgbm_style")
_ALIASES = {
    "linear": "linear", "lr": "linear",
    "tree": "tree", "cart": "tree", "dt": "tree",
    "forest": "random_forest", "rf": "random_forest", "random_forest": "random_forest",
    "xgb": "xgb_style", "xgb_style": "xgb_style", "xgboost": "xgb_style",
    "lgbm": "lgbm_style", "lgbm_style": "lgbm_style", "lightgbm": "lgbm_style",
}


def canonical_kind(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_KINDS)}") from None


@dataclass(frozen=True)
class HyperParams:
    """Learner settings. ``max_depth=None`` means unlimited depth;
    ``feature_subsample=None`` means one third of the features (forest)."""

    max_depth: int | None = 10
    min_samples_leaf: int = 2
    n_trees: int = 100
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    max_leaves: int = 31
    n_bins: int = 255
    feature_subsample: float | None = None
    seed: int = 42

    def validate(self) -> "HyperParams":
        checks = [
            (self.max_depth is None or self.max_depth >= 0, "max_depth must be >= 0 or null"),
            (self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1"),
            (self.n_trees >= 0, "n_trees must be >= 0"),
            (0.0 < self.learning_rate <= 1.0, "learning_rate must lie in (0, 1]"),
            (self.reg_lambda >= 0.0, "reg_lambda must be non-negative"),
            (self.min_split_gain >= 0.0, "min_split_gain must be non-negative"),
            (self.max_leaves >= 1, "max_leaves must be >= 1"),
            (2 <= self.n_bins <= 65536, "n_bins must lie in [2, 65536]"),
            (self.feature_subsample is None or 0.0 < self.feature_subsample <= 1.0,
             "feature_subsample must lie in (0, 1]"),
            (0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        return cls(**d).validate()


_DEFAULTS = {
    "linear": HyperParams(),
    "tree": HyperParams(max_depth=10, min_samples_leaf=2, n_trees=1),
    "random_forest": HyperParams(max_depth=10, min_samples_leaf=2, n_trees=100),
    "xgb_style": HyperParams(max_depth=6, n_trees=200, learning_rate=0.1, reg_lambda=1.0),
    "lgbm_style": HyperParams(max_depth=None, n_trees=200, learning_rate=0.1, reg_lambda=1.0,
                              max_leaves=31, n_bins=255),
}


def default_hyper(kind: str, **overrides) -> HyperParams:
    """Documented defaults for ``kind`` with keyword overrides applied."""
    return replace(_DEFAULTS[canonical_kind(kind)], **overrides).validate()
