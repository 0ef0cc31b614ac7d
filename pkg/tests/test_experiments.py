import numpy as np
import pytest

from designlab import _kernels
from designlab.analysis import IN_SAMPLE, OUT_OF_SAMPLE, bias_decompose, expected_error
from designlab.core import ConfigError, SeedSpec, make_rng
from designlab.experiments import (
    DEFAULT_P_GRID,
    METRICS,
    ExperimentConfig,
    ExperimentTable,
    aggregate,
    metric_matrix,
    run,
    run_double_descent,
    run_knn_sweep,
    run_noise_sweep,
    worker_count,
)
from designlab.smoothers import KNN, LeastSquares, knn_weights


def small(experiment, **kw):
    base = dict(n=30, n_test=20, replications=6)
    if experiment == "double_descent":
        base.update(p_range=(2, 10, 29, 30, 31, 60), s=10)
    base.update(kw)
    return ExperimentConfig.default(experiment, **base)


def test_full_scale_defaults():
    knn = ExperimentConfig.default("knn_sweep")
    assert (knn.n, knn.n_test, knn.d, knn.sigma, knn.k_range) == (100, 100, 5, (5.0,), tuple(range(1, 101)))
    noise = ExperimentConfig.default("noise_sweep")
    assert 0.0 in noise.sigma
    dd = ExperimentConfig.default("double_descent")
    assert (dd.n, dd.sigma, dd.s) == (100, (0.5,), 50)
    assert dd.p_range == DEFAULT_P_GRID and max(dd.p_range) >= 2 * dd.n and dd.d == 200
    lin = ExperimentConfig.default("bias_decomp", truth="linear")
    assert (lin.d, lin.s, lin.rho) == (10, 5, 0.35)
    assert ExperimentConfig.default("bias_decomp").truth == "friedman"
    assert knn.replications == 100


@pytest.mark.parametrize(
    "experiment,kw,field",
    [
        ("knn_sweep", dict(k_range=(0,)), "k_range"),
        ("knn_sweep", dict(k_range=(1, 101)), "k_range"),
        ("knn_sweep", dict(replications=0), "replications"),
        ("knn_sweep", dict(sigma=(1.0, 2.0)), "sigma"),
        ("knn_sweep", dict(d=4), "d"),
        ("noise_sweep", dict(sigma=(1.0, 2.0)), "sigma"),
        ("double_descent", dict(p_range=(0, 5)), "p_range"),
        ("double_descent", dict(s=0), "s"),
        ("bias_decomp", dict(truth="scaled_sparse"), "truth"),
        ("bias_decomp", dict(truth="linear", rho=1.0), "rho"),
    ],
)
def test_config_validation(experiment, kw, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.default(experiment, **kw)
    assert info.value.field == field


def test_knn_sweep_structure_and_invariants():
    cfg = small("knn_sweep")
    table = run_knn_sweep(cfg)
    assert len(table) == 30 * 2 * len(METRICS) * 6
    assert table.keys_unique()
    ks, bias_in = metric_matrix(table, IN_SAMPLE, "bias_sq")
    assert np.all(bias_in[:, 0] == 0.0)
    _, nm_in = metric_matrix(table, IN_SAMPLE, "nm_bias_sq")
    assert np.all(nm_in[:, 0] == 0.0)
    for setting in (IN_SAMPLE, OUT_OF_SAMPLE):
        _, var = metric_matrix(table, setting, "variance")
        np.testing.assert_allclose(var, np.broadcast_to(25.0 / ks, var.shape), rtol=1e-15)
        assert np.all(var[:, -1] == 25.0 / 30)
        _, err = metric_matrix(table, setting, "err")
        _, b = metric_matrix(table, setting, "bias_sq")
        np.testing.assert_allclose(err, b + var + 25.0, atol=1e-10)
        _, tr = metric_matrix(table, setting, "train_err")
        _, ex = metric_matrix(table, setting, "excess_err")
        np.testing.assert_allclose(ex, err - tr, atol=1e-10)


def test_knn_sweep_matches_pointwise_path():
    """Prefix-mean sweep vs independent per-point weight vectors on replication 0."""
    cfg = small("knn_sweep", replications=1)
    table = run_knn_sweep(cfg)
    dgp = cfg.dgp()
    rng = make_rng(SeedSpec(cfg.base_seed, 0))
    X, Xt = dgp.sample_inputs(cfg.n, rng), dgp.sample_inputs(cfg.n_test, rng)
    for k in (1, 2, 7, 30):
        es = expected_error(X, Xt, KNN(k), dgp, OUT_OF_SAMPLE)
        reports = [bias_decompose(knn_weights(X, x, k), dgp, X) for x in Xt]
        got = {m: metric_matrix(table, OUT_OF_SAMPLE, m)[1][0, k - 1] for m in METRICS}
        assert got["bias_sq"] == pytest.approx(es.mean_squared_bias, rel=1e-12)
        assert got["err"] == pytest.approx(es.expected_error, rel=1e-12)
        assert got["nm_bias_sq"] == pytest.approx(np.mean([r.neighbor_matching_bias**2 for r in reports]), rel=1e-12)
        assert got["avg_bias_sq"] == pytest.approx(
            np.mean([r.averaging_bias**2 for r in reports]), rel=1e-10, abs=1e-14
        )
        es_in = expected_error(X, None, KNN(k), dgp, IN_SAMPLE)
        assert metric_matrix(table, IN_SAMPLE, "err")[1][0, k - 1] == pytest.approx(es_in.expected_error, rel=1e-12)


def test_noise_sweep_bias_constant_across_sigma():
    cfg = small("noise_sweep", sigma=(0.0, 1.0, 5.0))
    table = run_noise_sweep(cfg)
    base = metric_matrix(table, OUT_OF_SAMPLE, "bias_sq@sigma=0")[1]
    for s in ("1", "5"):
        for setting in (IN_SAMPLE, OUT_OF_SAMPLE):
            assert np.array_equal(
                metric_matrix(table, setting, f"bias_sq@sigma={s}")[1],
                metric_matrix(table, setting, "bias_sq@sigma=0")[1],
            )
    assert base.shape == (6, 30)
    err0 = metric_matrix(table, IN_SAMPLE, "err@sigma=0")[1]
    assert np.all(err0[:, 0] == 0.0)


def test_double_descent_invariants():
    cfg = small("double_descent")
    table = run_double_descent(cfg)
    ps, err_in = metric_matrix(table, IN_SAMPLE, "err")
    over = ps >= cfg.n
    np.testing.assert_allclose(err_in[:, over], 0.5, atol=1e-10)
    _, train = metric_matrix(table, IN_SAMPLE, "train_err")
    assert np.all(train[:, over] <= 1e-10)
    assert np.all(train[:, ~over] > 0)
    _, avg = metric_matrix(table, OUT_OF_SAMPLE, "avg_bias_sq")
    assert np.all(avg <= 1e-10)
    assert table.metadata["intercept"] == "none"


def test_double_descent_matches_expected_error():
    cfg = small("double_descent", replications=1)
    table = run_double_descent(cfg)
    dgp = cfg.dgp()
    rng = make_rng(SeedSpec(cfg.base_seed, 0))
    X, Xt = dgp.sample_inputs(cfg.n, rng), dgp.sample_inputs(cfg.n_test, rng)
    ps, err = metric_matrix(table, OUT_OF_SAMPLE, "err")
    for j, p in enumerate(ps.astype(int)):
        assert err[0, j] == pytest.approx(expected_error(X, Xt, LeastSquares(p), dgp, OUT_OF_SAMPLE).expected_error, rel=1e-9)


def test_bias_decomp_linear_has_no_averaging_bias():
    table = run(small("bias_decomp", truth="linear", d=10, s=5, rho=0.35))
    for setting in (IN_SAMPLE, OUT_OF_SAMPLE):
        assert np.all(metric_matrix(table, setting, "avg_bias_sq")[1] <= 1e-10)
    assert np.all(metric_matrix(table, IN_SAMPLE, "nm_bias_sq")[1][:, 0] == 0.0)


@pytest.mark.parametrize("experiment", ["knn_sweep", "noise_sweep", "double_descent", "bias_decomp"])
def test_determinism_across_worker_counts(monkeypatch, experiment):
    cfg = small(experiment)
    monkeypatch.setenv("DESIGNLAB_THREADS", "1")
    a = run(cfg)
    monkeypatch.setenv("DESIGNLAB_THREADS", "4")
    b = run(cfg)
    assert a.equals(b)
    assert a.metadata == b.metadata


def test_knn_sweep_identical_across_backends():
    cfg = small("knn_sweep")
    prev = _kernels.set_backend("numpy")
    try:
        a = run(cfg)
    finally:
        _kernels.set_backend("numba")
    b = run(cfg)
    _kernels.set_backend(prev)
    assert a.equals(b)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DESIGNLAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("DESIGNLAB_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.delenv("DESIGNLAB_THREADS")
    assert worker_count() >= 1


def test_excess_error_nonnegative_in_expectation():
    table = run(small("knn_sweep", replications=30))
    agg_m = aggregate(table.select(IN_SAMPLE, "excess_err"), "mean")
    agg_s = aggregate(table.select(IN_SAMPLE, "excess_err"), "stderr")
    assert np.all(agg_m.value >= -3 * agg_s.value)


# -- aggregation --------------------------------------------------------------


def _table(values, reps=None):
    reps = list(range(len(values))) if reps is None else reps
    return ExperimentTable.from_rows([(1.0, IN_SAMPLE, "err", v, r) for v, r in zip(values, reps)])


def test_aggregate_examples():
    single = aggregate(_table([0.123456789]), "mean")
    assert single.value.tolist() == [0.123456789]
    assert single.replication.tolist() == [-1]
    assert aggregate(_table([2.5] * 4), "stderr").value.tolist() == [0.0]
    two = _table([1.0, 3.0])
    assert aggregate(two, "mean").value.tolist() == [2.0]
    assert aggregate(two, "stderr").value.tolist() == [1.0]


def test_aggregate_groups_and_order_independence():
    t = run(small("knn_sweep"))
    perm = np.random.default_rng(0).permutation(len(t))
    shuffled = ExperimentTable(t.sweep_value[perm], t.setting[perm], t.metric[perm], t.value[perm], t.replication[perm])
    a, b = aggregate(t), aggregate(shuffled)
    assert len(a) == 30 * 2 * len(METRICS)
    assert np.array_equal(a.value, b.value)


def test_aggregate_empty_raises():
    with pytest.raises(ValueError):
        aggregate(ExperimentTable.empty())
