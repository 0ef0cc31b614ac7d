"""Ground-truth regression functions, input laws and outcome sampling.

Three truths are available:

``Friedman``
    ``10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + x5``; needs d >= 5 and
    ignores coordinates past the fifth.
``LinearSum(s)``
    Sum of the first ``s`` coordinates.
``ScaledSparseLinear(s)``
    Sum of the first ``s`` coordinates divided by ``sqrt(s)``, so that the
    signal variance is 1 under independent standard normal inputs.

All truth evaluators are vectorised over leading axes: an input of shape
``(..., d)`` yields output of shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import DimensionError, NoiseModel, NumericalError, ParameterError, Stream

__all__ = [
    "DGPSpec",
    "Friedman",
    "GaussianAR",
    "LinearSum",
    "ScaledSparseLinear",
    "UniformCube",
    "ar_covariance",
    "friedman_eval",
    "linear_sum_eval",
    "sample_gaussian_ar_inputs",
    "sample_outcomes",
    "sample_uniform_inputs",
    "scaled_sparse_linear_eval",
]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise DimensionError("input must have at least one axis")
    return x


def friedman_eval(x):
    x = _as_points(x)
    if x.shape[-1] < 5:
        raise DimensionError(f"Friedman function needs at least 5 coordinates, got {x.shape[-1]}")
    x1, x2, x3, x4, x5 = (x[..., i] for i in range(5))
    out = 10.0 * np.sin(np.pi * x1 * x2) + 20.0 * (x3 - 0.5) ** 2 + 10.0 * x4 + x5
    return float(out) if out.ndim == 0 else out


def _check_s(s: int, d: int) -> None:
    if not 1 <= s <= d:
        raise ParameterError(f"s must satisfy 1 <= s <= d={d}, got {s}")


def linear_sum_eval(x, s: int):
    x = _as_points(x)
    _check_s(s, x.shape[-1])
    out = x[..., :s].sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def scaled_sparse_linear_eval(x, s: int):
    x = _as_points(x)
    _check_s(s, x.shape[-1])
    out = x[..., :s].sum(axis=-1) / np.sqrt(s)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Friedman:
    is_linear = False
    min_dim = 5

    def __call__(self, X):
        return friedman_eval(X)


@dataclass(frozen=True)
class LinearSum:
    s: int
    is_linear = True

    def __post_init__(self):
        if int(self.s) < 1:
            raise ParameterError(f"s must be >= 1, got {self.s}")

    @property
    def min_dim(self) -> int:
        return self.s

    def __call__(self, X):
        return linear_sum_eval(X, self.s)


@dataclass(frozen=True)
class ScaledSparseLinear:
    s: int
    is_linear = True

    def __post_init__(self):
        if int(self.s) < 1:
            raise ParameterError(f"s must be >= 1, got {self.s}")

    @property
    def min_dim(self) -> int:
        return self.s

    def __call__(self, X):
        return scaled_sparse_linear_eval(X, self.s)


Truth = Union[Friedman, LinearSum, ScaledSparseLinear]


def sample_uniform_inputs(n: int, d: int, rng: Stream) -> np.ndarray:
    if n < 1 or d < 1:
        raise ParameterError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    return rng.uniform((n, d))


def ar_covariance(d: int, rho: float) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def sample_gaussian_ar_inputs(n: int, d: int, rho: float, rng: Stream) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma) with Sigma_ij = rho**|i-j|, via the Cholesky factor."""
    if n < 1 or d < 1:
        raise ParameterError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not 0.0 <= rho < 1.0:
        raise ParameterError(f"rho must satisfy 0 <= rho < 1, got {rho}")
    z = rng.normal((n, d))
    if rho == 0.0:
        return z
    cov = ar_covariance(d, rho)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"Cholesky factorisation of AR({rho}) covariance failed", np.linalg.cond(cov)
        ) from exc
    return z @ L.T


@dataclass(frozen=True)
class UniformCube:
    d: int

    def sample(self, n: int, rng: Stream) -> np.ndarray:
        return sample_uniform_inputs(n, self.d, rng)


@dataclass(frozen=True)
class GaussianAR:
    d: int
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError(f"rho must satisfy 0 <= rho < 1, got {self.rho}")

    def sample(self, n: int, rng: Stream) -> np.ndarray:
        return sample_gaussian_ar_inputs(n, self.d, self.rho, rng)


InputLaw = Union[UniformCube, GaussianAR]


@dataclass(frozen=True)
class DGPSpec:
    truth: Truth
    input_law: InputLaw
    noise: NoiseModel

    def __post_init__(self):
        d = self.input_law.d
        if d < 1:
            raise ParameterError(f"input dimension must be >= 1, got {d}")
        if self.truth.min_dim > d:
            raise ParameterError(
                f"{type(self.truth).__name__} needs d >= {self.truth.min_dim}, got d={d}"
            )

    @property
    def d(self) -> int:
        return self.input_law.d

    @property
    def sigma(self) -> float:
        return float(self.noise.sigma)

    def f(self, X) -> np.ndarray:
        return self.truth(X)

    def sample_inputs(self, n: int, rng: Stream) -> np.ndarray:
        return self.input_law.sample(n, rng)


def sample_outcomes(spec: DGPSpec, X, rng: Stream) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.d:
        raise DimensionError(f"X must have shape (n, {spec.d}), got {X.shape}")
    fx = spec.truth(X)
    # always consume the noise draws so stream position does not depend on sigma
    z = rng.normal(X.shape[0])
    if spec.sigma == 0.0:
        return np.array(fx, dtype=float)
    return fx + spec.sigma * z
