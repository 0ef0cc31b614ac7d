"""Shared value types, error classes and the seeded random-stream contract.

Random streams
--------------
Every stream is a PCG64 generator whose state is seeded through
``numpy.random.SeedSequence([base_seed, replication_index])``. Variates are
derived from the raw 64-bit PCG64 outputs only, so they do not depend on
numpy's own (version-dependent) distribution code:

* uniform on [0, 1):   ``(raw >> 11) * 2**-53``
* uniform on (0, 1):   ``((raw >> 11) + 0.5) * 2**-53``
* standard normal:     inverse normal CDF (``scipy.special.ndtri``) applied to
  the open-interval uniform. One raw word per normal variate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ConfigError",
    "Dataset",
    "DimensionError",
    "NoiseModel",
    "NumericalError",
    "ParameterError",
    "SeedSpec",
    "Stream",
    "make_rng",
]

_U64_MAX = 2**64 - 1
_INV_2_53 = 2.0**-53


class ParameterError(ValueError):
    """A scalar parameter is outside its legal range."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with each other or with a model."""


class NumericalError(ArithmeticError):
    """A linear-algebra routine failed.

    ``condition`` carries the best available condition-number estimate.
    """

    def __init__(self, message: str, condition: float = float("nan")):
        super().__init__(message)
        self.condition = condition


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _finite_matrix(name: str, a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Training inputs/outcomes plus evaluation inputs. Arrays are read-only copies."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_eval: np.ndarray = field(default=None)

    def __post_init__(self):
        X = _finite_matrix("X_train", self.X_train)
        y = np.array(self.y_train, dtype=float, copy=True)
        if y.ndim != 1:
            raise DimensionError(f"y_train must be 1-D, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y_train contains NaN or Inf")
        y.setflags(write=False)
        n, d = X.shape
        if n < 1 or d < 1:
            raise DimensionError(f"X_train must have n >= 1 and d >= 1, got {X.shape}")
        if y.shape[0] != n:
            raise DimensionError(f"y_train has length {y.shape[0]}, X_train has {n} rows")
        if self.X_eval is None:
            Xe = np.empty((0, d))
            Xe.setflags(write=False)
        else:
            Xe = _finite_matrix("X_eval", self.X_eval)
            if Xe.shape[1] != d:
                raise DimensionError(
                    f"X_eval has {Xe.shape[1]} columns, X_train has {d}"
                )
        object.__setattr__(self, "X_train", X)
        object.__setattr__(self, "y_train", y)
        object.__setattr__(self, "X_eval", Xe)

    @property
    def n(self) -> int:
        return self.X_train.shape[0]

    @property
    def d(self) -> int:
        return self.X_train.shape[1]

    @property
    def m(self) -> int:
        return self.X_eval.shape[0]


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    replication_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.base_seed) <= _U64_MAX:
            raise ParameterError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed}")
        if int(self.replication_index) < 0:
            raise ParameterError(
                f"replication_index must be nonnegative, got {self.replication_index}"
            )


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ParameterError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def variance(self) -> float:
        return float(self.sigma) ** 2


class Stream:
    """Single-owner deterministic random stream (see module docstring)."""

    def __init__(self, seed: SeedSpec):
        self.seed = seed
        ss = np.random.SeedSequence([int(seed.base_seed), int(seed.replication_index)])
        self._bitgen = np.random.PCG64(ss)

    def _raw53(self, size) -> np.ndarray:
        raw = self._bitgen.random_raw(size)
        return (np.asarray(raw, dtype=np.uint64) >> np.uint64(11)).astype(np.float64)

    def uniform(self, size=None) -> np.ndarray:
        """Uniform variates on [0, 1)."""
        return self._raw53(size) * _INV_2_53

    def normal(self, size=None) -> np.ndarray:
        """Standard normal variates by inverse-CDF transform."""
        return ndtri((self._raw53(size) + 0.5) * _INV_2_53)


def make_rng(seed: SeedSpec) -> Stream:
    return Stream(seed)
