import json
import math
import os
import subprocess
import sys

import pytest

from loopwind.cli import emit_table, run

DIST = ["dist", "--geometry", "cp1", "--r0", "0.6", "--r", "0.9", "--theta", "0", "--t", "0.8",
        "--k", "20"]


def test_dist_example(tmp_path):
    out = tmp_path / "d.json"
    assert run(DIST + ["--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert abs(sum(data["probs"]) - 1.0) <= 1e-4
    assert data["norm_defect"] <= 1e-4
    assert data["k"] == list(range(-20, 21))
    assert set(data) >= {"manifest", "geometry", "params", "k", "probs", "norm_defect", "tail_constant"}
    side = json.loads((tmp_path / "d.json.manifest.json").read_text())
    assert side["wall_clock_seconds"] >= 0
    assert side["command"] == "dist" and side["version"]


def test_cf_zero_prints_one(capsys):
    assert run(["cf", "--geometry", "ads", "--n", "1", "--mu", "0.5", "--lambda", "0"]) == 0
    assert capsys.readouterr().out.strip() == "1.0"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "loopwind", "cf", "--geometry", "ads", "--mu", "0.5",
                          "--lambda", "0"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "1.0"


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(["dist", "--geometry", "torus", "--t", "1"]) == 2
    assert run(["dist", "--geometry", "cp1", "--r0", "0.6", "--r", "2.0", "--t", "1"]) == 2
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "missing" / "d.json"
    assert run(DIST + ["--out", str(bad)]) == 2
    assert not bad.parent.exists()
    assert run(["limits", "--geometry", "plane"]) == 2


def test_numeric_failure_exit_1(tmp_path, capsys):
    out = tmp_path / "narrow.json"
    argv = ["dist", "--geometry", "cp1", "--r0", "0.6", "--r", "0.9", "--t", "0.8", "--k", "2",
            "--out", str(out)]
    assert run(argv) == 1
    assert "WindowTooNarrowError" in capsys.readouterr().err
    assert not out.exists()
    assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []


def test_csv_window_rows(tmp_path):
    out = tmp_path / "d.csv"
    argv = ["dist", "--geometry", "ads", "--mu", "1", "--r0", "0.5", "--t", "1", "--k", "2",
            "--out", str(out)]
    assert run(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1] == "k,prob,ci_lo,ci_hi"
    assert len(lines[2:]) == 5
    assert all(line.endswith(",,") for line in lines[2:])


def test_grid_csv_header(tmp_path):
    out = tmp_path / "f.csv"
    argv = ["density", "--geometry", "sphere", "--mu", "1", "--r0", "0.4", "--r", "0.7", "--t", "0.8",
            "--theta-grid", "0:1:0.25", "--out", str(out)]
    assert run(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "x,value,abs_error_estimate"
    assert len(lines) == 2 + 5


def test_json_round_trip(tmp_path):
    payload = {"manifest": {"command": "x", "argv": []}, "geometry": "cp1", "params": {"t": 0.1},
               "k": [-1, 0, 1], "probs": [0.1, 0.8, 0.1 + 1e-17], "norm_defect": 3.3e-7,
               "tail_constant": None}
    path = tmp_path / "p.json"
    emit_table(payload, "json", str(path))
    assert json.loads(path.read_text()) == payload


def test_emit_rejects_non_finite():
    from loopwind.errors import NumericError
    with pytest.raises(NumericError):
        emit_table({"manifest": {}, "value": math.nan}, "json", None)


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_replay_byte_identical(tmp_path, fmt):
    out = tmp_path / f"d.{fmt}"
    assert run(DIST + ["--out", str(out)]) == 0
    again = tmp_path / f"again.{fmt}"
    assert run(["replay", str(out), "--out", str(again)]) == 0
    a, b = out.read_bytes(), again.read_bytes()
    # only the recorded artifact path differs
    assert a.replace(str(out).encode(), b"") == b.replace(str(again).encode(), b"")
    assert run(["replay", str(out)]) == 0
    assert out.read_bytes() == a


def test_simulate_thread_count_independent(tmp_path):
    base = ["simulate", "--geometry", "ads", "--mu", "1", "--r0", "0.5", "--r", "0.9", "--t", "1",
            "--paths", "20000", "--seed", "5", "--bin", "0.05", "--k", "2", "--format", "json"]
    p1, p2 = tmp_path / "s1.json", tmp_path / "s2.json"
    assert run(base + ["--threads", "1", "--out", str(p1)]) == 0
    assert run(base + ["--threads", "2", "--out", str(p2)]) == 0
    d1, d2 = json.loads(p1.read_text()), json.loads(p2.read_text())
    for key in ("probs", "stderr", "ci_lo", "ci_hi", "n_accepted"):
        assert d1[key] == d2[key]


def test_theta_reduced_with_warning(capsys):
    assert run(["cf", "--geometry", "cp1", "--r0", "0.6", "--r", "0.9", "--t", "0.8", "--theta", "7",
                "--lambda", "0.5", "--bridge"]) == 0
    assert "reduced modulo" in capsys.readouterr().err


def test_limits_and_kernel(capsys):
    assert run(["limits", "--geometry", "sphere", "--n", "2", "--lambda", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == [math.exp(-2)]
    assert run(["kernel", "--family", "hyperbolic", "--alpha", "0", "--beta", "0", "--t", "1",
                "--r0", "0.5", "--r", "1.0"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["value"][0] > 0 and data["abs_error_estimate"][0] < 1e-8 * data["value"][0]


@pytest.mark.slow
def test_compare_sl2_within_three_sigma(tmp_path):
    out = tmp_path / "cmp.json"
    argv = ["compare", "--geometry", "sl2", "--mu", "1", "--t", "4", "--paths", "200000", "--seed", "7",
            "--out", str(out)]
    assert run(argv) == 0
    data = json.loads(out.read_text())
    assert all(abs(r["z"]) <= 3 for r in data["rows"])
    assert data["all_within_3_sigma"]
