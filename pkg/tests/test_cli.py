import subprocess
import sys

import pytest

from designlab.cli import main
from designlab.experiments import METRICS
from designlab.output import read_csv


def test_knn_sweep_row_count(tmp_path, capsys):
    assert main(["knn-sweep", "--k-max", "10", "--reps", "3", "--out", str(tmp_path)]) == 0
    t = read_csv(tmp_path / "knn_sweep.csv")
    assert len(t) == 10 * 2 * len(METRICS) * 3
    assert (tmp_path / "knn_sweep.svg").read_text().startswith("<?xml")
    out = capsys.readouterr().out
    assert "seed=1" in out and "wall=" in out


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as info:
        main(["double-descent", "--help"])
    assert info.value.code == 0
    assert "--p-grid" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv,flag",
    [
        (["knn-sweep", "--k-max", "0"], "--k-max"),
        (["knn-sweep", "--k-max", "500"], "--k-max"),
        (["knn-sweep", "--reps", "0"], "--reps"),
        (["knn-sweep", "--sigma", "-1"], "--sigma"),
        (["double-descent", "--d", "200", "--p-grid", "5,500"], "--p-grid"),
        (["bias-decomp", "--truth", "linear", "--rho", "1.5"], "--rho"),
        (["validate", "--reps", "1"], "--reps"),
    ],
)
def test_invalid_config_exits_2_and_writes_nothing(tmp_path, capsys, argv, flag):
    out = tmp_path / "o"
    with pytest.raises(SystemExit) as info:
        main(argv + ["--out", str(out)] if argv[0] != "validate" else argv)
    assert info.value.code == 2
    assert flag in capsys.readouterr().err
    assert not out.exists()


def test_format_and_aggregate_only(tmp_path):
    assert main(["bias-decomp", "--k-max", "5", "--reps", "4", "--format", "csv", "--aggregate-only",
                 "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bias_decomp.csv", "bias_decomp_stderr.csv"]
    mean = read_csv(tmp_path / "bias_decomp.csv")
    assert set(mean.replication.tolist()) == {-1}
    assert len(mean) == 5 * 2 * len(METRICS)


def test_unwritable_output_exits_1(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["knn-sweep", "--k-max", "2", "--reps", "2", "--out", str(blocker / "sub")]) == 1
    assert "error" in capsys.readouterr().err


def test_validate_subcommand(capsys):
    assert main(["validate", "--reps", "2000"]) in (0, 1)
    out = capsys.readouterr().out
    assert out.count("PASS") + out.count("FAIL") == 24
    assert "configurations passed" in out


def test_thread_count_does_not_change_bytes(tmp_path):
    outputs = []
    for threads in ("1", "4"):
        d = tmp_path / threads
        subprocess.run(
            [sys.executable, "-m", "designlab", "double-descent", "--n", "20", "--n-test", "10", "--s", "5",
             "--p-grid", "2,10,20,40", "--reps", "5", "--out", str(d)],
            check=True, env={**__import__("os").environ, "DESIGNLAB_THREADS": threads}, capture_output=True,
        )
        outputs.append(((d / "double_descent.csv").read_bytes(), (d / "double_descent.svg").read_bytes()))
    assert outputs[0] == outputs[1]
