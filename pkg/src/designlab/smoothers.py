"""Predictors written as linear smoothers.

Every predictor here outputs ``sum_i w_i(x) y_i`` at an evaluation point x. The
weight vector ``w(x)`` fully determines bias and variance given the design, so
it is the object the analysis layer works with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .core import DimensionError, NumericalError, ParameterError

__all__ = [
    "KNN",
    "LeastSquares",
    "SmootherSpec",
    "WeightVector",
    "knn_weights",
    "least_squares_weights",
    "pinv",
    "predict",
    "smoother_matrix",
]


@dataclass(frozen=True)
class KNN:
    k: int

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")

    def check(self, n: int, d: int) -> None:
        if not 1 <= self.k <= n:
            raise ParameterError(f"k must satisfy 1 <= k <= n={n}, got {self.k}")


@dataclass(frozen=True)
class LeastSquares:
    """Least squares on the first ``p`` columns, no intercept.

    For ``p > n`` this is the minimum-norm interpolating fit.
    """

    p: int

    def __post_init__(self):
        if int(self.p) < 1:
            raise ParameterError(f"p must be >= 1, got {self.p}")

    def check(self, n: int, d: int) -> None:
        if not 1 <= self.p <= d:
            raise ParameterError(f"p must satisfy 1 <= p <= d={d}, got {self.p}")


SmootherSpec = Union[KNN, LeastSquares]


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    eval_point: np.ndarray
    source: SmootherSpec

    def __len__(self):
        return self.weights.shape[0]


def _train_matrix(X_train) -> np.ndarray:
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"X_train must be a nonempty 2-D array, got shape {X.shape}")
    return X


def _point(x0, d: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != d:
        raise DimensionError(f"eval point has length {x0.shape[0]}, expected {d}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("eval point contains NaN or Inf")
    return x0


def knn_weights(X_train, x0, k: int) -> WeightVector:
    X = _train_matrix(X_train)
    x0 = _point(x0, X.shape[1])
    spec = KNN(k)
    spec.check(*X.shape)
    order = _kernels.neighbor_order(X, x0[None, :])[0]
    w = np.zeros(X.shape[0])
    w[order[:k]] = 1.0 / k
    return WeightVector(w, x0, spec)


def pinv(A, rcond: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the thin SVD.

    Singular values at or below ``rcond * s_max`` are dropped; the default
    ``rcond`` is ``max(rows, cols) * eps``.
    """
    A = np.asarray(A, dtype=float)
    if rcond is None:
        rcond = max(A.shape) * np.finfo(float).eps
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.norm(A, 1) * np.linalg.norm(A, -1) if A.size else float("nan")
        raise NumericalError(f"SVD did not converge for a {A.shape} matrix", cond) from exc
    if s.size == 0:
        return np.zeros(A.shape[::-1])
    keep = s > rcond * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vt.T * inv_s) @ U.T


def least_squares_weights(X_train, x0, p: int) -> WeightVector:
    X = _train_matrix(X_train)
    x0 = _point(x0, X.shape[1])
    spec = LeastSquares(p)
    spec.check(*X.shape)
    w = x0[:p] @ pinv(X[:, :p])
    return WeightVector(w, x0, spec)


def _is_same_design(X_train, X_eval) -> bool:
    return X_eval is X_train or (
        X_eval.shape == X_train.shape and np.array_equal(X_eval, X_train)
    )


def smoother_matrix(X_train, X_eval, spec: SmootherSpec) -> np.ndarray:
    """Stack the weight vectors of all eval rows; ``S @ y`` predicts at every row.

    When ``X_eval`` is the training design, each row's own index is ranked first
    by k-NN even if duplicated rows exist.
    """
    X = _train_matrix(X_train)
    Xe = np.asarray(X_eval, dtype=float)
    if Xe.ndim != 2 or Xe.shape[1] != X.shape[1]:
        raise DimensionError(f"X_eval must have shape (m, {X.shape[1]}), got {Xe.shape}")
    if not np.all(np.isfinite(Xe)):
        raise ValueError("X_eval contains NaN or Inf")
    n = X.shape[0]
    spec.check(*X.shape)
    if isinstance(spec, KNN):
        order = _kernels.neighbor_order(X, Xe, _is_same_design(X, Xe))
        S = np.zeros((Xe.shape[0], n))
        rows = np.repeat(np.arange(Xe.shape[0]), spec.k)
        S[rows, order[:, : spec.k].reshape(-1)] = 1.0 / spec.k
        return S
    if isinstance(spec, LeastSquares):
        return Xe[:, : spec.p] @ pinv(X[:, : spec.p])
    raise TypeError(f"unknown smoother spec {spec!r}")


def predict(w: WeightVector, y_train) -> float:
    y = np.asarray(y_train, dtype=float)
    if y.shape != w.weights.shape:
        raise DimensionError(f"y_train has shape {y.shape}, weights have {w.weights.shape}")
    return float(w.weights @ y)
