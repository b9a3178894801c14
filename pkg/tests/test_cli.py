import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from commenergy.cli import config_hash, main, solution_columns
from commenergy.model import MEGABYTE_BITS, scenario_to_dict, validate_scenario
from commenergy.scenarios import fixture_path, load_fixture

from helpers import single_node, two_nodes


def write(tmp_path, cfg, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(scenario_to_dict(cfg)))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_solve_writes_artifacts(tmp_path):
    cfg = single_node(data_mb=20.0, fixed=False, knots=30)
    scen = write(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["solve", str(scen), "--out", str(out)]) == 0
    header, data = read_csv(out / "solution.csv")
    assert header == ["t_s", "U1_p_W_to_AP", "U1_r_bps_to_AP", "U1_s_bits", "U1_q_m", "U1_v_mps", "U1_F_N"]
    assert data.shape == (cfg.knot_count + 1, len(header))
    assert np.all(np.isfinite(data))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["solve"]["status"] == "optimal"
    assert summary["delivered_bits"] == pytest.approx(20 * MEGABYTE_BITS, rel=1e-9)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] == config_hash(cfg)
    assert manifest["status"] == "optimal"
    assert {"started", "finished", "solver_options", "output_dir"} <= set(manifest)


def test_two_node_columns_and_priority(tmp_path):
    cfg = two_nodes(knots=20)
    assert solution_columns(cfg)[1:4] == ["U1_p_W_to_AP", "U1_r_bps_to_AP", "U1_s_bits"]
    out = tmp_path / "out"
    assert main(["solve", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    assert "priority" in json.loads((out / "summary.json").read_text())


def test_solve_is_byte_identical(tmp_path):
    scen = write(tmp_path, single_node(data_mb=30.0, fixed=False, knots=40))
    for d in ("a", "b"):
        assert main(["solve", str(scen), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "solution.csv").read_bytes() == (tmp_path / "b" / "solution.csv").read_bytes()


def test_infeasible_exit_code(tmp_path, capsys):
    scen = write(tmp_path, single_node(data_mb=500.0, fixed=False, knots=30))
    assert main(["solve", str(scen), "--out", str(tmp_path / "out")]) == 2
    assert "deliverable" in capsys.readouterr().out
    assert not (tmp_path / "out" / "solution.csv").exists()
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["status"] == "infeasible"


def test_malformed_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"horizon": -5, "nodes": []}))
    assert main(["solve", str(bad), "--out", str(tmp_path / "out")]) == 1
    assert "horizon" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["check", str(broken)]) == 1


def test_round_trip_hash():
    cfg = load_fixture("single_node")
    again = validate_scenario(json.loads(json.dumps(scenario_to_dict(cfg))))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)
    assert config_hash(two_nodes()) != config_hash(cfg)


def test_compare_policies_flag(tmp_path):
    scen = write(tmp_path, single_node(data_mb=20.0, fixed=False, knots=40))
    out = tmp_path / "out"
    assert main(["solve", str(scen), "--out", str(out), "--compare-policies", "--units", "report"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["policy_comparison"]["uplift"] > 1.0
    assert "total_kJ" in summary["report_units"]


def test_solve_all(tmp_path):
    write(tmp_path, single_node(knots=10), "a.json")
    write(tmp_path, two_nodes(knots=10), "b.json")
    (tmp_path / "notes.json").write_text(json.dumps({"antenna_gain_product": 1.0}))
    out = tmp_path / "out"
    assert main(["solve", str(tmp_path), "--all", "--out", str(out)]) == 0
    assert (out / "a" / "solution.csv").exists() and (out / "b" / "solution.csv").exists()
    assert not (out / "notes").exists()


def test_baseline_zero_data(tmp_path):
    scen = write(tmp_path, single_node(data_mb=0.0, knots=20))
    out = tmp_path / "wf.csv"
    assert main(["baseline", str(scen), "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == ["t_s", "U1_p_W", "U1_gain"]
    assert np.all(data[:, 1] == 0.0)


def test_baseline_too_much_data(tmp_path):
    scen = write(tmp_path, single_node(data_mb=500.0, knots=20))
    assert main(["baseline", str(scen)]) == 2


def test_oracle_command(tmp_path, capsys):
    scen = write(tmp_path, single_node(data_mb=20.0, fixed=False, knots=3))
    assert main(["oracle", str(scen), "--speed-grid", "10"]) == 0
    out = capsys.readouterr().out
    assert "oracle energy" in out and "ratio" in out


def test_calibrate_command(tmp_path, capsys):
    target = tmp_path / "g.json"
    assert main(["calibrate", str(fixture_path("single_node")), "--target-mb", "56",
                 "--write", str(target)]) == 0
    G = float(capsys.readouterr().out.split("=")[1])
    assert G == pytest.approx(1.0017282769527989, rel=1e-9)
    assert json.loads(target.read_text())["antenna_gain_product"] == G


def test_check_command(tmp_path, capsys):
    scen = write(tmp_path, single_node(data_mb=20.0, fixed=False, knots=20))
    assert main(["check", str(scen), "--points", "2"]) == 0
    assert "pass" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    scen = write(tmp_path, single_node(knots=10))
    res = subprocess.run([sys.executable, "-m", "commenergy", "solve", str(scen), "--out",
                          str(tmp_path / "out")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "optimal" in res.stdout
