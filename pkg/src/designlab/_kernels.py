"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The backend is chosen at import time from ``DESIGNLAB_NUMBA`` (``0``/``false``
/``off`` selects numpy; default is numba when it imports). ``set_backend`` can
switch it at runtime, which the tests and the benchmark use.

Both backends accumulate in the same order for ``neighbor_order`` and
``neighbor_prefix_means``, so they agree bit for bit there. ``smoother_losses``
uses BLAS in the numpy path and may differ from the numba path in the last bits.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

__all__ = [
    "HAS_NUMBA",
    "get_backend",
    "neighbor_order",
    "neighbor_prefix_means",
    "set_backend",
    "smoother_losses",
]


# -- numpy implementations ---------------------------------------------------


def _sq_dists_numpy(X_train, X_eval):
    m, n = X_eval.shape[0], X_train.shape[0]
    d2 = np.zeros((m, n))
    # column-sequential accumulation keeps the summation order of the numba kernel
    for c in range(X_train.shape[1]):
        diff = X_eval[:, c][:, None] - X_train[:, c][None, :]
        d2 += diff * diff
    return d2


def neighbor_order_numpy(X_train, X_eval, self_match):
    d2 = _sq_dists_numpy(X_train, X_eval)
    if self_match:
        idx = np.arange(X_eval.shape[0])
        d2[idx, idx] = -1.0
    return np.argsort(d2, axis=1, kind="stable").astype(np.int64)


def neighbor_prefix_means_numpy(order, V):
    k = np.arange(1, order.shape[1] + 1, dtype=np.float64)
    return np.cumsum(V[order], axis=1) / k[None, :, None]


def smoother_losses_numpy(S, f_train, f_eval, Z, Z0, sigma):
    reps, m = Z.shape[0], S.shape[0]
    out = np.empty(reps)
    for r in range(reps):
        pred = S @ (f_train + sigma * Z[r])
        resid = (f_eval + sigma * Z0[r]) - pred
        out[r] = np.dot(resid, resid) / m
    return out


# -- numba implementations ---------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def neighbor_order_numba(X_train, X_eval, self_match):
        m, n, d = X_eval.shape[0], X_train.shape[0], X_train.shape[1]
        order = np.empty((m, n), dtype=np.int64)
        d2 = np.empty(n)
        for j in range(m):
            for i in range(n):
                acc = 0.0
                for c in range(d):
                    diff = X_eval[j, c] - X_train[i, c]
                    acc += diff * diff
                d2[i] = acc
            if self_match:
                d2[j] = -1.0
            order[j, :] = np.argsort(d2, kind="mergesort")
        return order

    @numba.njit(cache=True, nogil=True)
    def neighbor_prefix_means_numba(order, V):
        m, n = order.shape
        q = V.shape[1]
        out = np.empty((m, n, q))
        acc = np.empty(q)
        for j in range(m):
            acc[:] = 0.0
            for t in range(n):
                i = order[j, t]
                for c in range(q):
                    acc[c] += V[i, c]
                    out[j, t, c] = acc[c] / (t + 1)
        return out

    @numba.njit(cache=True, nogil=True)
    def smoother_losses_numba(S, f_train, f_eval, Z, Z0, sigma):
        reps, m, n = Z.shape[0], S.shape[0], S.shape[1]
        out = np.empty(reps)
        y = np.empty(n)
        for r in range(reps):
            for i in range(n):
                y[i] = f_train[i] + sigma * Z[r, i]
            loss = 0.0
            for j in range(m):
                pred = 0.0
                for i in range(n):
                    pred += S[j, i] * y[i]
                resid = (f_eval[j] + sigma * Z0[r, j]) - pred
                loss += resid * resid
            out[r] = loss / m
        return out

else:  # pragma: no cover
    neighbor_order_numba = neighbor_order_numpy
    neighbor_prefix_means_numba = neighbor_prefix_means_numpy
    smoother_losses_numba = smoother_losses_numpy


_IMPLS = {
    "numba": (neighbor_order_numba, neighbor_prefix_means_numba, smoother_losses_numba),
    "numpy": (neighbor_order_numpy, neighbor_prefix_means_numpy, smoother_losses_numpy),
}


def _backend_from_env() -> str:
    flag = os.environ.get("DESIGNLAB_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "off", "no") or not HAS_NUMBA:
        return "numpy"
    return "numba"


_backend = _backend_from_env()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    previous, _backend = _backend, name
    return previous


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def neighbor_order(X_train, X_eval, self_match: bool = False) -> np.ndarray:
    """Row j lists training indices by increasing distance to eval row j.

    Ties keep ascending index order. With ``self_match`` eval row j is
    training row j and is forced to the front.
    """
    fn = _IMPLS[_backend][0]
    return fn(_f64(X_train), _f64(X_eval), bool(self_match))


def neighbor_prefix_means(order, V) -> np.ndarray:
    """``out[j, k-1, c]`` is the mean of ``V[:, c]`` over the k nearest rows of eval point j."""
    fn = _IMPLS[_backend][1]
    return fn(np.ascontiguousarray(order, dtype=np.int64), _f64(V))


def smoother_losses(S, f_train, f_eval, Z, Z0, sigma: float) -> np.ndarray:
    """Per-replication mean squared prediction loss against noisy labels.

    Replication r fits on ``f_train + sigma * Z[r]`` through the smoother
    matrix ``S`` and scores against ``f_eval + sigma * Z0[r]``.
    """
    fn = _IMPLS[_backend][2]
    return fn(_f64(S), _f64(f_train), _f64(f_eval), _f64(Z), _f64(Z0), float(sigma))
