"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each timing is the best of ``--repeat`` runs after one warm-up call, so numba
compilation is excluded.
"""

import argparse
import time

from designlab import _kernels
from designlab.core import SeedSpec, make_rng
from designlab.experiments import ExperimentConfig, run


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = make_rng(SeedSpec(0, 0))
    X = rng.uniform((100, 5))
    Xe = rng.uniform((100, 5))
    order = _kernels.neighbor_order(X, Xe)
    V = rng.normal((100, 12))
    S = rng.uniform((25, 30))
    S /= S.sum(axis=1, keepdims=True)
    f_tr, f_ev = rng.normal(30), rng.normal(25)
    Z, Z0 = rng.normal((10_000, 30)), rng.normal((10_000, 25))
    cfg = ExperimentConfig.default("knn_sweep", replications=20)
    return {
        "neighbor_order 100x100, d=5": lambda: _kernels.neighbor_order(X, Xe),
        "neighbor_prefix_means 100x100x12": lambda: _kernels.neighbor_prefix_means(order, V),
        "smoother_losses 10k reps": lambda: _kernels.smoother_losses(S, f_tr, f_ev, Z, Z0, 1.0),
        "knn_sweep, 20 reps": lambda: run(cfg),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    previous = _kernels.get_backend()
    try:
        results = {}
        for backend in ("numpy", "numba"):
            _kernels.set_backend(backend)
            for name, fn in cases().items():
                results.setdefault(name, {})[backend] = best_of(fn, args.repeat)
    finally:
        _kernels.set_backend(previous)
    print(f"{'case':<36}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, t in results.items():
        print(f"{name:<36}{t['numpy'] * 1e3:>12.2f}{t['numba'] * 1e3:>12.2f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
