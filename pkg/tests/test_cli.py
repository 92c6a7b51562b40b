import csv
import json
import subprocess
import sys

import pytest

from leafspace.cli import main


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    report = out / "report.json"
    return code, json.loads(report.read_text()) if report.exists() else None, out


def test_lift_writes_report_and_trajectories(tmp_path):
    code, rep, out = run(tmp_path, "lift", "--scenario", "wedge", "--at", "1.5,0.5", "--to", "0.9")
    assert code == 0 and rep["passed"]
    rows = list(csv.reader(open(out / "trajectories.csv")))
    assert rows[0] == ["leaf", "t", "g0", "y0", "y1"]
    last = [float(v) for v in rows[-1][1:]]
    assert abs(last[0] - 1.0) < 1e-12 and abs(last[1] - 0.9) < 1e-12
    assert (out / "polylines" / "leaf_000.csv").exists()


def test_recurrence_reports_members(tmp_path):
    code, rep, _ = run(tmp_path, "recurrence", "--scenario", "full_disc", "--at", "1.0,0.1")
    assert code == 0
    assert rep["residuals"]["recurrence_sizes"] == [4]


def test_failing_check_exits_one_with_witness(tmp_path):
    code, rep, _ = run(tmp_path, "check", "hausdorff", "--scenario", "wedge_plus_ray")
    assert code == 1
    assert rep["verdicts"]["hausdorff"] is False
    assert rep["witnesses"]["hausdorff"]


@pytest.mark.parametrize("check", ["proper", "orbifold", "killing", "slice", "bundle"])
def test_wedge_checks_pass(tmp_path, check):
    code, rep, _ = run(tmp_path, "check", check, "--scenario", "wedge", "--samples", "8")
    assert code == 0, rep


def test_non_proper_rotation_over_the_line(tmp_path):
    code, rep, _ = run(tmp_path, "check", "proper", "--scenario", "full_disc", "--group", "line")
    assert code == 1 and rep["verdicts"]["proper"] is False


def test_example_defaults(tmp_path):
    code, rep, _ = run(tmp_path, "example", "affine_line")
    assert code == 0 and rep["verdicts"]["expected_abelian_compatible"]
    assert rep["residuals"]["flatness_defect"] > 0.1


@pytest.mark.parametrize("args", [
    ["example", "wedge", "--n", "2"],
    ["lift", "--scenario", "nowhere"],
    ["lift", "--scenario", "wedge", "--window-B", "-1"],
])
def test_invalid_configuration_exits_two(tmp_path, args):
    code, rep, _ = run(tmp_path, *args)
    assert code == 2 and rep is None


def test_thread_setting_is_validated(tmp_path, monkeypatch):
    monkeypatch.setenv("LEAFSPACE_THREADS", "many")
    code, _, _ = run(tmp_path, "lift", "--scenario", "wedge", "--at", "1.5,0.5")
    assert code == 2


def test_point_outside_the_domain_is_reported(tmp_path):
    code, rep, _ = run(tmp_path, "lift", "--scenario", "wedge", "--at", "1.5,0.0")
    assert code == 1
    assert rep["errors"][0]["error"] == "point-outside-domain"


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run([sys.executable, "-m", "leafspace", "lift", "--scenario", "full_disc", "--at", "1,0",
                           "--to", "1", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "pass" in proc.stdout
