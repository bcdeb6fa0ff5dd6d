import csv

import pytest

from oppctl.cli import COMPARISON_COLUMNS, main
from oppctl.report import CSV_COLUMNS

TWO_NODE = "10 CONN 0 1 up\n400 CONN 0 1 down\n"


@pytest.fixture
def trace(tmp_path):
    p = tmp_path / "trace.txt"
    p.write_text(TWO_NODE)
    return p


def test_run_writes_three_files(tmp_path, trace):
    out = tmp_path / "out"
    assert main(["run", "--trace", str(trace), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"report.csv", "report.json", "rd_timeline.csv"}
    header = (out / "report.csv").read_text().splitlines()[0]
    assert header.split(",") == list(CSV_COLUMNS)


def test_missing_trace(tmp_path, capsys):
    assert main(["run", "--trace", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_config(tmp_path, trace, capsys):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("control.alpha = 1.5\n")
    assert main(["run", "--config", str(cfg), "--trace", str(trace), "--out", str(tmp_path)]) == 3
    assert "control.alpha" in capsys.readouterr().err


def test_broken_trace_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 CONN 0 1 up\n2 CONN 0 1 down\n3 CONN 0 1 down\n")
    assert main(["validate-trace", str(bad)]) == 4
    assert "line 3" in capsys.readouterr().err


def test_gen_then_validate(tmp_path, capsys):
    path = tmp_path / "g.txt"
    assert main(["gen-trace", "--groups", "2", "--nodes-per-group", "3", "--duration", "3600",
                 "--seed", "4", "--out", str(path)]) == 0
    assert main(["validate-trace", str(path)]) == 0
    assert "nodes=6" in capsys.readouterr().out


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for p in (a, b):
        main(["gen-trace", "--seed", "9", "--duration", "1800", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_compare_outputs(tmp_path):
    path = tmp_path / "g.txt"
    main(["gen-trace", "--groups", "2", "--nodes-per-group", "3", "--duration", "1800", "--seed", "1",
          "--out", str(path)])
    cfg = tmp_path / "c.conf"
    cfg.write_text("engine.buffer_bytes = 5242880\n")
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(cfg), "--trace", str(path), "--seeds", "1-3",
                 "--sizes", "600-100000,500000-1048576", "--out", str(out)]) == 0
    with open(out / "comparison.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(COMPARISON_COLUMNS)
    assert [(r["size_min"], r["size_max"]) for r in rows] == [("600", "100000"), ("500000", "1048576")]
    assert all(r["overhead_epidemic"] == "0" and r["seeds"] == "3" for r in rows)
    runs = (out / "runs.csv").read_text().splitlines()
    assert len(runs) == 1 + 2 * 3 * 3


def test_default_config_prints_keys(capsys):
    assert main(["default-config"]) == 0
    assert "control.alpha = 0.8" in capsys.readouterr().out
