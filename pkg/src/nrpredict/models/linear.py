from __future__ import annotations

import numpy as np

from ..preprocess import ScalerParams
from .base import LinearModel
from .hyper import HyperParams, default_hyper

COND_LIMIT = 1e12
RIDGE = 1e-8


def _gram(A: np.ndarray) -> np.ndarray:
    # elementwise products summed along rows: no BLAS, so the result does not
    # depend on the thread count
    return (A[:, :, None] * A[:, None, :]).sum(axis=0)


def solve_normal_equations(X, y) -> tuple[np.ndarray, float, bool]:
    """Least-squares ``(weights, intercept, singular)`` for ``y ~ X w + b``.

    Solves ``(A^T A) beta = A^T y`` with ``A = [1 | X]``. When the Gram matrix
    is ill-conditioned (condition number above 1e12) a ridge term of 1e-8 is
    added to the non-intercept diagonal and ``singular`` is reported.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    gram = _gram(A)
    rhs = (A * y[:, None]).sum(axis=0)
    singular = not np.isfinite(np.linalg.cond(gram)) or np.linalg.cond(gram) > COND_LIMIT
    if not singular:
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            singular = True
    if singular:
        ridge = np.eye(gram.shape[0]) * RIDGE
        ridge[0, 0] = 0.0
        try:
            beta = np.linalg.solve(gram + ridge, rhs)
        except np.linalg.LinAlgError:
            beta = np.linalg.lstsq(gram + ridge, rhs, rcond=None)[0]
    return beta[1:].copy(), float(beta[0]), bool(singular)


def fit_linear(X, y, hyper: HyperParams | None = None, *, scaler: ScalerParams | None = None,
               target_kind: str | None = None) -> LinearModel:
    """Ordinary least squares on (already scaled) features."""
    hyper = hyper or default_hyper("linear")
    weights, intercept, singular = solve_normal_equations(X, y)
    scaler = scaler or ScalerParams.identity([f"x{j}" for j in range(np.shape(X)[1])])
    return LinearModel(weights, intercept, scaler, hyper, target_kind, singular)
