import json
import subprocess
import sys

import pytest

from monocoint.cli import main

DATA = "x,z\n0,1.0\n0.2,0.5\n-0.1,1.2\n5.0,9.9\n"


@pytest.fixture
def data(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(DATA)
    return str(p)


def test_simulate_writes_path(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["simulate", "--chain", "rw", "--n", "1000", "--seed", "7", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x" and len(lines) == 1002 and lines[1] == "0.0"
    again = tmp_path / "q.csv"
    main(["simulate", "--chain", "rw", "--n", "1000", "--seed", "7", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_simulate_params(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["simulate", "--chain", "ar1", "--params", "rho=0.9,sd=2", "--n", "5",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 7


@pytest.mark.parametrize("argv", [
    ["simulate", "--chain", "bogus", "--n", "10", "--out", "x.csv"],
    ["simulate", "--chain", "rw", "--params", "rho=2", "--n", "10", "--out", "x.csv"],
    ["simulate", "--chain", "ar1", "--params", "rho=1.5", "--n", "10", "--out", "x.csv"],
    ["simulate", "--chain", "rw", "--params", "nonsense", "--n", "10", "--out", "x.csv"],
    ["simulate", "--chain", "rw", "--n", "-1", "--out", "x.csv"],
    ["simulate", "--chain", "rw", "--n", "10", "--out", "x.csv", "--unknown"],
])
def test_simulate_bad_input_exits_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == 2
    assert capsys.readouterr().err


def test_fit_prints_estimate(data, tmp_path, capsys):
    out, ecdf = tmp_path / "fit.csv", tmp_path / "ecdf.csv"
    code = main(["fit", "--data", data, "--x0", "0", "--delta", "0.5", "--query", "0",
                 "--out", str(out), "--ecdf-out", str(ecdf)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "1.0"
    assert out.read_text().splitlines() == ["knot,value", "-0.1,1.2", "0.0,1.0", "0.2,0.5"]
    assert ecdf.read_text().splitlines()[0] == "knot,height"


def test_fit_empty_window(data, capsys):
    assert main(["fit", "--data", data, "--x0", "100", "--delta", "0.5"]) == 3
    assert "no observations in window" in capsys.readouterr().err


def test_fit_query_outside(data, capsys):
    assert main(["fit", "--data", data, "--x0", "0", "--delta", "0.5", "--query", "9"]) == 2
    assert "query outside window" in capsys.readouterr().err


def test_fit_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,z\n1,abc\n")
    assert main(["fit", "--data", str(bad), "--x0", "0", "--delta", "1"]) == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--x0", "0", "--delta", "1"]) == 2


def test_invert(data, capsys):
    assert main(["invert", "--data", data, "--x0", "0", "--delta", "0.5", "--level", "1.1"]) == 0
    assert capsys.readouterr().out.strip() == "-0.1 interior"
    assert main(["invert", "--data", data, "--x0", "0", "--delta", "0.5", "--level", "5"]) == 0
    value, status = capsys.readouterr().out.split()
    assert status == "clipped-low" and float(value) == pytest.approx(-1.1)


def test_invert_missing_level(data):
    with pytest.raises(SystemExit) as exc:
        main(["invert", "--data", data, "--x0", "0", "--delta", "0.5"])
    assert exc.value.code == 2


@pytest.mark.parametrize("sub", ["simulate", "fit", "invert", "experiment"])
def test_help(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_experiment_validation(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("chain = ar1\nn_grid = 100\nreps = 0\n")
    assert main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
    assert main(["experiment", "--config", str(tmp_path / "nope.txt"),
                 "--out-dir", str(tmp_path)]) == 2


def test_experiment_runs_and_reports(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("experiment = consistency\nchain = ar1\nn_grid = 100,1000,10000\n"
                   "reps = 20\nseed = 1\nout = ar\nformat = json\n")
    code = main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "out")])
    report = json.loads((tmp_path / "out" / "ar_consistency.json").read_text())
    assert code == (0 if report["summary"]["pass"] else 4)
    assert "consistency:" in capsys.readouterr().out


def test_experiment_failure_exit_4(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("experiment = consistency\nchain = rw\nn_grid = 100\nreps = 1\nformat = csv\n")
    assert main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 4
    assert (tmp_path / "report_consistency.csv").exists()


def test_console_entry_point(data):
    res = subprocess.run([sys.executable, "-m", "monocoint.cli", "fit", "--data", data,
                          "--x0", "0", "--delta", "0.5", "--query", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "1.0"
