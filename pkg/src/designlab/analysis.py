"""Exact bias/variance functionals and their Monte Carlo cross-checks.

All quantities are conditional on the realised design: the only randomness
averaged over is outcome noise (training labels, and test labels for the
error functionals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DimensionError, NoiseModel, ParameterError, Stream
from .smoothers import SmootherSpec, WeightVector, smoother_matrix

__all__ = [
    "IN_SAMPLE",
    "OUT_OF_SAMPLE",
    "SETTINGS",
    "BiasReport",
    "ErrorSummary",
    "MCEstimate",
    "bias_at",
    "bias_decompose",
    "expected_error",
    "interpolation_check",
    "mc_error_estimate",
    "mean_and_stderr",
    "pointwise_terms",
    "variance_at",
]

IN_SAMPLE = "in_sample"
OUT_OF_SAMPLE = "out_of_sample"
SETTINGS = (IN_SAMPLE, OUT_OF_SAMPLE)

INTERPOLATION_TOL = 1e-8


def _truth_fn(truth):
    return truth.truth if hasattr(truth, "truth") else truth


def _sigma(noise) -> float:
    if isinstance(noise, NoiseModel):
        return float(noise.sigma)
    if hasattr(noise, "noise"):
        return float(noise.noise.sigma)
    return float(NoiseModel(float(noise)).sigma)


def _check_weights(w: WeightVector, X_train) -> np.ndarray:
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[0] != w.weights.shape[0]:
        raise DimensionError(
            f"weights of length {w.weights.shape[0]} do not match X_train of shape {X.shape}"
        )
    if w.eval_point.shape[0] != X.shape[1]:
        raise DimensionError(
            f"eval point of length {w.eval_point.shape[0]} does not match d={X.shape[1]}"
        )
    return X


def bias_at(w: WeightVector, truth, X_train) -> float:
    X = _check_weights(w, X_train)
    f = _truth_fn(truth)
    return float(f(w.eval_point) - w.weights @ f(X))


def variance_at(w: WeightVector, noise) -> float:
    return _sigma(noise) ** 2 * float(w.weights @ w.weights)


@dataclass(frozen=True)
class BiasReport:
    total_bias: float
    neighbor_matching_bias: float
    averaging_bias: float
    eval_point: np.ndarray


def bias_decompose(w: WeightVector, truth, X_train) -> BiasReport:
    """Split the bias at one point into neighbor-matching and averaging parts.

    With ``xbar = sum_i w_i x_i`` the neighbor-matching part is
    ``f(x0) - f(xbar)`` (failure to reconstruct x0 in input space) and the
    averaging part is ``f(xbar) - sum_i w_i f(x_i)`` (nonlinearity of f under
    averaging; zero for linear f).
    """
    X = _check_weights(w, X_train)
    f = _truth_fn(truth)
    f0 = float(f(w.eval_point))
    f_bar = float(f(w.weights @ X))
    avg_f = float(w.weights @ f(X))
    return BiasReport(
        total_bias=f0 - avg_f,
        neighbor_matching_bias=f0 - f_bar,
        averaging_bias=f_bar - avg_f,
        eval_point=w.eval_point,
    )


@dataclass(frozen=True)
class ErrorSummary:
    setting: str
    expected_error: float
    mean_squared_bias: float
    mean_variance: float
    noise_floor: float


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    reps: int


def _check_setting(setting: str) -> None:
    if setting not in SETTINGS:
        raise ParameterError(f"setting must be one of {SETTINGS}, got {setting!r}")


def _eval_design(X_train, X_eval, setting):
    _check_setting(setting)
    X = np.asarray(X_train, dtype=float)
    if setting == IN_SAMPLE:
        return X, X
    if X_eval is None:
        raise DimensionError("out-of-sample evaluation needs X_eval")
    Xe = np.asarray(X_eval, dtype=float)
    if Xe.ndim != 2 or Xe.shape[0] < 1:
        raise DimensionError(f"X_eval must be a nonempty 2-D array, got shape {Xe.shape}")
    return X, Xe


def pointwise_terms(S, X_train, X_eval, truth) -> dict[str, np.ndarray]:
    """Per-eval-row bias, neighbor-matching bias, averaging bias and ``||w||^2``."""
    f = _truth_fn(truth)
    f_train = f(X_train)
    f_eval = f(X_eval)
    smoothed = S @ f_train
    f_bar = f(S @ X_train)
    return {
        "bias": f_eval - smoothed,
        "nm_bias": f_eval - f_bar,
        "avg_bias": f_bar - smoothed,
        "wnorm2": np.einsum("ij,ij->i", S, S),
    }


def expected_error(X_train, X_eval, spec: SmootherSpec, truth, setting: str) -> ErrorSummary:
    """Analytic expected squared prediction error given the design.

    ``setting="in_sample"`` scores at the training inputs against fresh labels
    (``X_eval`` is ignored); ``"out_of_sample"`` scores at the rows of ``X_eval``.
    """
    X, Xe = _eval_design(X_train, X_eval, setting)
    sigma = _sigma(truth)
    f = _truth_fn(truth)
    S = smoother_matrix(X, Xe, spec)
    # mean squared bias is the noiseless loss; reuse the Monte Carlo kernel so the
    # two paths share their arithmetic exactly
    msb = float(
        _kernels.smoother_losses(
            S, f(X), f(Xe), np.zeros((1, X.shape[0])), np.zeros((1, Xe.shape[0])), 0.0
        )[0]
    )
    mean_var = sigma**2 * float(np.mean(np.einsum("ij,ij->i", S, S)))
    floor = sigma**2
    return ErrorSummary(setting, msb + mean_var + floor, msb, mean_var, floor)


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and standard error, shifted by the first value.

    The shift makes the mean exact for constant input. A single value has
    stderr ``nan``.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("mean of an empty sample")
    shift = v[0]
    dev = v - shift
    mean_dev = float(np.sum(dev)) / v.size
    if v.size == 1:
        return float(shift), float("nan")
    var = float(np.sum((dev - mean_dev) ** 2)) / (v.size - 1)
    return float(shift + mean_dev), float(np.sqrt(var / v.size))


def mc_error_estimate(
    X_train, X_eval, spec: SmootherSpec, truth, setting: str, reps: int, rng: Stream
) -> MCEstimate:
    """Brute-force estimate of ``expected_error``.

    Each replication redraws the training labels, refits, redraws the test
    labels and records the mean squared prediction loss.
    """
    if int(reps) < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    X, Xe = _eval_design(X_train, X_eval, setting)
    sigma = _sigma(truth)
    f = _truth_fn(truth)
    S = smoother_matrix(X, Xe, spec)
    Z = rng.normal((reps, X.shape[0]))
    Z0 = rng.normal((reps, Xe.shape[0]))
    losses = _kernels.smoother_losses(S, f(X), f(Xe), Z, Z0, sigma)
    mean, se = mean_and_stderr(losses)
    return MCEstimate(mean, se, int(reps))


def interpolation_check(X_train, spec: SmootherSpec, tol: float = INTERPOLATION_TOL) -> bool:
    X = np.asarray(X_train, dtype=float)
    S = smoother_matrix(X, X, spec)
    return bool(np.max(np.abs(S - np.eye(X.shape[0]))) <= tol)
