"""Command-line front end: ``designlab <subcommand> [flags]``.

Exit status is 0 on success, 2 on invalid configuration and 1 on runtime
failure. Output files are written only after all computation has finished.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .core import ConfigError
from .experiments import (
    DEFAULT_SEED,
    ExperimentConfig,
    aggregate,
    run,
    run_oracle_suite,
)
from .output import ChartSpec, atomic_write, count_nonfinite, render_svg, table_to_csv

SUBCOMMANDS = {
    "knn-sweep": "knn_sweep",
    "noise-sweep": "noise_sweep",
    "double-descent": "double_descent",
    "bias-decomp": "bias_decomp",
}

_FLAG_FOR_FIELD = {
    "n": "--n",
    "n_test": "--n-test",
    "d": "--d",
    "sigma": "--sigma",
    "k_range": "--k-max",
    "p_range": "--p-grid",
    "s": "--s",
    "replications": "--reps",
    "base_seed": "--seed",
    "truth": "--truth",
    "rho": "--rho",
}


@dataclass(frozen=True)
class OutputSpec:
    out_dir: Path
    formats: frozenset
    aggregate_only: bool = False

    def __post_init__(self):
        if not self.formats:
            raise ConfigError("format", "at least one output format is required")


def _p_grid(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n", type=int, help="training sample size (default 100)")
    p.add_argument("--n-test", type=int, help="test points per replication (default 100)")
    p.add_argument("--d", type=int, help="input dimension")
    p.add_argument("--sigma", type=float, action="append", help="outcome noise sd (repeatable for noise-sweep)")
    p.add_argument("--k-max", type=int, help="sweep k = 1..K (default n)")
    p.add_argument("--p-grid", type=_p_grid, help="comma-separated feature counts for double-descent")
    p.add_argument("--s", type=int, help="number of relevant features")
    p.add_argument("--reps", type=int, help="design replications (default 100)")
    p.add_argument("--seed", type=int, help=f"base seed (default {DEFAULT_SEED})")
    p.add_argument("--out", default="results", help="output directory (default ./results)")
    p.add_argument("--format", choices=("csv", "svg", "both"), default="both")
    p.add_argument("--aggregate-only", action="store_true", help="write replication means/stderrs only")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="designlab",
        description="Bias/variance experiments for k-NN and least squares in fixed and random designs.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_flags()
    sub.add_parser("knn-sweep", parents=[common], help="error, bias and variance by k (Friedman DGP)")
    sub.add_parser("noise-sweep", parents=[common], help="k sweep across several noise levels")
    dd = sub.add_parser("double-descent", parents=[common], help="least squares error by number of features")
    dd.add_argument("--rho", type=float, help="feature correlation (default 0)")
    bd = sub.add_parser("bias-decomp", parents=[common], help="neighbor-matching vs averaging bias by k")
    bd.add_argument("--truth", choices=("friedman", "linear"), default="friedman")
    bd.add_argument("--rho", type=float, help="AR feature correlation for the linear truth (default 0.35)")
    val = sub.add_parser("validate", help="analytic expected error vs Monte Carlo on randomised configurations")
    val.add_argument("--seed", type=int, default=DEFAULT_SEED)
    val.add_argument("--reps", type=int, default=10_000, help="Monte Carlo noise resamples per configuration")
    for name, sp in sub.choices.items():
        sp.set_defaults(subparser=sp)
    return parser


def _config_from_args(experiment: str, args) -> ExperimentConfig:
    overrides = {}
    for attr, key in (("n", "n"), ("n_test", "n_test"), ("d", "d"), ("s", "s"), ("reps", "replications"),
                      ("seed", "base_seed")):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    if args.sigma is not None:
        overrides["sigma"] = tuple(args.sigma)
    if args.k_max is not None:
        if experiment == "double_descent":
            raise ConfigError("k_range", "not used by double-descent")
        if args.k_max < 1:
            raise ConfigError("k_range", f"must be >= 1, got {args.k_max}")
        overrides["k_range"] = tuple(range(1, args.k_max + 1))
    if args.p_grid is not None:
        if experiment != "double_descent":
            raise ConfigError("p_range", "only used by double-descent")
        overrides["p_range"] = args.p_grid
    if getattr(args, "truth", None) is not None:
        overrides["truth"] = args.truth
    if getattr(args, "rho", None) is not None:
        overrides["rho"] = args.rho
    return ExperimentConfig.default(experiment, **overrides)


def _chart_spec(cfg: ExperimentConfig) -> ChartSpec:
    if cfg.experiment == "knn_sweep":
        return ChartSpec(("err", "bias_sq", "variance"), "Error, squared bias and variance by k", "k", "value")
    if cfg.experiment == "noise_sweep":
        metrics = tuple(f"err@sigma={s:g}" for s in cfg.sigma)
        return ChartSpec(metrics, "Prediction error by k across noise levels", "k", "err")
    if cfg.experiment == "double_descent":
        return ChartSpec(("err",), "Prediction error by number of features", "p", "err (log scale)", log_y=True)
    return ChartSpec(("nm_bias_sq", "avg_bias_sq"), "Squared bias components by k", "k", "value")


def _render_outputs(cfg, table, spec: OutputSpec):
    """Return ``{filename: text}`` and the number of non-finite values dropped."""
    files = {}
    mean = aggregate(table, "mean")
    if "csv" in spec.formats:
        if spec.aggregate_only:
            files[f"{cfg.experiment}.csv"] = table_to_csv(mean)
            files[f"{cfg.experiment}_stderr.csv"] = table_to_csv(aggregate(table, "stderr"))
        else:
            files[f"{cfg.experiment}.csv"] = table_to_csv(table)
    dropped = 0
    if "svg" in spec.formats:
        dropped = count_nonfinite(mean)
        files[f"{cfg.experiment}.svg"] = render_svg(mean, _chart_spec(cfg))
    return files, dropped


def _run_experiment(parser, experiment: str, args) -> int:
    try:
        cfg = _config_from_args(experiment, args)
        formats = frozenset(("csv", "svg") if args.format == "both" else (args.format,))
        spec = OutputSpec(Path(args.out), formats, args.aggregate_only)
    except ConfigError as exc:
        flag = _FLAG_FOR_FIELD.get(exc.field, exc.field)
        parser.error(f"invalid value for {flag}: {exc.message}")

    start = time.perf_counter()
    table = run(cfg)
    files, dropped = _render_outputs(cfg, table, spec)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        atomic_write(spec.out_dir / name, text)
    wall = time.perf_counter() - start
    print(
        f"{experiment}: {len(table)} rows, files={','.join(sorted(files))} in {spec.out_dir}, "
        f"wall={wall:.2f}s, seed={cfg.base_seed}, nonfinite_dropped={dropped}"
    )
    return 0


def _run_validate(parser, args) -> int:
    if args.reps < 2:
        parser.error("invalid value for --reps: must be >= 2")
    if args.seed < 0:
        parser.error("invalid value for --seed: must be >= 0")
    start = time.perf_counter()
    results = run_oracle_suite(args.seed, args.reps)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(
            f"{status} {res.name}: analytic={res.analytic:.6g} mc={res.mc_mean:.6g} "
            f"se={res.mc_stderr:.3g} z={res.z_score:+.2f}"
        )
    n_pass = sum(r.passed for r in results)
    wall = time.perf_counter() - start
    print(f"validate: {n_pass}/{len(results)} configurations passed, wall={wall:.2f}s, seed={args.seed}")
    return 0 if n_pass == len(results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _run_validate(args.subparser, args)
        return _run_experiment(args.subparser, SUBCOMMANDS[args.command], args)
    except ConfigError as exc:
        print(f"designlab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to exit status 1
        print(f"designlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
