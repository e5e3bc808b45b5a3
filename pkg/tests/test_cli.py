import csv
import io
import json
import subprocess
import sys

import pytest

from flatkhinchin.cli import main

T = "builtin:square_torus"
L = "builtin:L(2,2)"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_surface_info(capsys):
    code, out, _ = run(capsys, "surface", "info", L)
    doc = json.loads(out)
    assert code == 0 and doc["genus"] == 2 and doc["sigma"] == "1/2" and doc["area"] == "3"


def test_surface_info_from_file(capsys, tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"polygons": [[["0", "0"], ["1/2", "0"], ["1/2", "1"], ["0", "1"]]],
                             "gluings": [[0, 0, 0, 2], [0, 1, 0, 3]], "marked_points": [[0, 0]]}))
    code, out, _ = run(capsys, "surface", "info", str(p))
    assert code == 0 and json.loads(out)["area"] == "1/2"


def test_bad_input_exit_code(capsys):
    code, _, err = run(capsys, "surface", "info", "builtin:nothing")
    assert code == 2 and "error" in err


def test_flow_trace_jsonl(capsys):
    code, out, _ = run(capsys, "flow", "trace", "--surface", T, "--x", "0,1/2,1/2", "--tau", "0", "--t", "2.5")
    events = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and [e["kind"] for e in events] == ["edge_crossing", "edge_crossing", "time_reached"]


def test_cylinders_csv(capsys):
    code, out, _ = run(capsys, "--format", "csv", "cylinders", "enumerate", "--surface", T, "--length", "1.5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["tau", "T", "h", "area"] and len(rows) == 4


def test_global_flags_after_subcommand(capsys, tmp_path):
    dest = tmp_path / "c.csv"
    code, out, _ = run(capsys, "cylinders", "enumerate", "--surface", T, "--length", "1.5", "--format", "csv",
                       "--out", str(dest))
    assert code == 0 and out == "" and dest.read_text().startswith("tau,T,h,area")


def test_iet_build_and_scan(capsys):
    code, out, _ = run(capsys, "iet", "build", "--surface", T, "--tau", "0.1741")
    assert code == 0 and len(json.loads(out)["translations"]) == 2
    code, out, _ = run(capsys, "--format", "csv", "iet", "scan", "--tau", "0.1741", "--x", "0.3", "--N", "1000")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["sample", "n", "distance", "a_n"]
    assert all(float(r["distance"]) < float(r["a_n"]) for r in rows)


def test_series_check(capsys):
    code, out, _ = run(capsys, "series", "check", "--gen", "log:1,2", "--K", "10000")
    doc = json.loads(out)
    assert code == 0 and doc["label"] == "empirical"
    assert doc["verdicts"]["sum_a"] == "converges_empirically"
    assert doc["verdicts"]["sum_i_ai"] == "diverges_empirically"


def test_verify_commands(capsys):
    code, out, _ = run(capsys, "verify", "covering", "--surface", T, "--length", "10")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] and doc["measured"] <= doc["bound"]
    code, out, _ = run(capsys, "verify", "covering", "--surface", T, "--length", "10", "--constant", "0.01")
    assert code == 1 and not json.loads(out)["pass"]
    code, out, _ = run(capsys, "verify", "sum-bound", "--surface", L, "--length", "5", "--kmax", "3")
    assert code == 0 and json.loads(out)["intervals"] == 15
    code, out, _ = run(capsys, "verify", "key", "--surface", T, "--N", "10")
    assert code == 0 and json.loads(out)["measured"] > 0
    code, out, _ = run(capsys, "verify", "lemma-flow", "--surface", L, "--length", "6")
    assert code == 0 and json.loads(out)["violations"] == []
    code, out, _ = run(capsys, "verify", "translation", "--surface", T, "--count", "2", "--samples", "200")
    assert code == 0 and json.loads(out)["pass"]


def test_experiment_threads_identical(capsys):
    args = ["experiment", "khinchin-flow", "--samples", "6", "--horizon", "500"]
    _, a, _ = run(capsys, "--seed", "3", "--threads", "1", *args)
    _, b, _ = run(capsys, "--seed", "3", "--threads", "2", *args)
    assert a == b and json.loads(a)["config"]["seed"] == 3


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "flatkhinchin.cli", "surface", "info", T],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["genus"] == 1
