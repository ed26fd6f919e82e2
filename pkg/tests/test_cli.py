"""End-to-end checks of the command-line interface."""

import csv
import json

import numpy as np
import pytest

from vicrm.cli import main


def test_generate_writes_instance_files(tmp_path):
    out = tmp_path / "instances"
    code = main(["generate", "--example", "1", "--scenario", "A", "--seed", "5",
                 "--out", str(out), "--dims", "5x2", "--instances", "2"])
    assert code == 0
    files = sorted(out.glob("*.json"))
    assert len(files) == 2
    doc = json.loads(files[0].read_text())
    assert doc["n"] == 5 and doc["m"] == 2
    assert len(doc["ellipsoids"]) == 2
    assert set(doc["ellipsoids"][0]) == {"A", "b", "alpha"}
    assert "slater" in doc and "operator" in doc


@pytest.fixture()
def instance_file(tmp_path):
    out = tmp_path / "inst"
    main(["generate", "--example", "2", "--scenario", "A", "--seed", "11",
          "--out", str(out), "--dims", "5x2", "--instances", "1"])
    return next(out.glob("*.json"))


def test_solve_prints_result_and_trace(tmp_path, capsys, instance_file):
    trace = tmp_path / "trace.csv"
    code = main(["solve", "--instance", str(instance_file), "--solver", "crm-vip1",
                 "--eps", "1e-6", "--max-iter", "100000", "--trace", str(trace)])
    assert code == 0
    out = capsys.readouterr().out
    doc = json.loads(out[out.index("{"):])
    assert doc["status"] == "converged"
    assert len(doc["final_point"]) == 5
    assert doc["natural_residual"] <= 1e-3
    with open(trace, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        assert header == ["iteration", "residual"]
        rows = list(reader)
    assert len(rows) == doc["iterations"]


def test_check_reports_residuals(tmp_path, capsys, instance_file):
    point = tmp_path / "point.json"
    doc = json.loads(instance_file.read_text())
    point.write_text(json.dumps(doc["slater"]))
    code = main(["check", "--instance", str(instance_file), "--point", str(point)])
    assert code == 0
    text = capsys.readouterr().out
    out = json.loads(text[text.index("{"):])
    assert out["feasibility"] == 0.0
    assert out["natural_residual"] >= 0.0


def test_bench_emits_reports_and_figures(tmp_path, capsys):
    out = tmp_path / "report"
    code = main(["bench", "--example", "2", "--scenario", "B", "--seed", "3",
                 "--out", str(out), "--dims", "5x2", "--instances", "2"])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert {"rows.csv", "medians.csv", "speedups.csv",
            "profile_iter.csv", "profile_time.csv",
            "profile_iter.png", "profile_time.png"} <= names
    medians = (out / "medians.csv").read_text()
    assert medians.startswith("#")
    assert "crm-vip1" in medians


def test_bench_no_plots_flag(tmp_path):
    out = tmp_path / "report"
    code = main(["bench", "--example", "2", "--scenario", "B", "--seed", "3",
                 "--out", str(out), "--dims", "5x2", "--instances", "1",
                 "--no-plots"])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert "profile_iter.png" not in names
    assert "rows.csv" in names


def test_bad_arguments_exit_code_two(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bench", "--example", "9", "--scenario", "A", "--seed", "1",
              "--out", str(tmp_path)])
    assert info.value.code == 2


def test_missing_instance_file_is_an_error(capsys):
    code = main(["solve", "--instance", "/nonexistent.json", "--solver", "egm"])
    assert code == 2
