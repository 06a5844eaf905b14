import csv
import json

import pytest

from sms.cli import main
from sms.config import from_dict, parse_config, shipped_config


def _cfg(tmp_path, **extra):
    data = {
        "mesh": {"dimension": 1, "half_width": 8.0, "nodes_per_axis": 127},
        "potential": {"name": "harmonic"},
        "target": 2,
        "solver": {"nabla_budget": 10, "geometry_budget": 4},
    }
    data.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_spectrum_default(tmp_path):
    out = tmp_path / "spec"
    assert main(["spectrum", str(shipped_config()), "--out", str(out)]) == 0
    rows = _rows(out / "eigen.csv")
    assert len(rows) == 8
    assert list(rows[0]) == ["k", "lambda", "residual", "group_k", "group_h"]
    assert abs(float(rows[0]["lambda"]) - 2.0) < 1e-3
    assert (out / "eigenvectors" / "e_8.csv").exists()
    assert (out / "plots" / "eigen.svg").exists()
    # 17 significant digits
    assert len(rows[1]["lambda"].replace(".", "").lstrip("0")) >= 15


def test_run_json_round_trips(tmp_path):
    out = tmp_path / "rt"
    assert main(["spectrum", str(_cfg(tmp_path)), "--out", str(out), "--seed", "9"]) == 0
    run = json.loads((out / "run.json").read_text())
    cfg = from_dict(run["config"])
    assert cfg == parse_config(_cfg(tmp_path)).with_overrides(output_dir=str(out), rng_seed=9)
    assert run["seed"] == 9 and run["tolerances"]["cg"] == 1e-10 and run["exit_code"] == 0


def test_verify_all_and_verify_f(tmp_path):
    assert main(["verify-all", str(_cfg(tmp_path)), "--out", str(tmp_path / "va")]) == 0
    checks = _rows(tmp_path / "va" / "checks.csv")
    assert checks and all(r["passed"] == "true" for r in checks)
    assert main(["verify-f", str(_cfg(tmp_path)), "--out", str(tmp_path / "vf")]) == 0
    bad = _cfg(tmp_path, nonlinearity={"p": 1.0, "r": 3.0})
    assert main(["verify-f", str(bad), "--out", str(tmp_path / "vf2")]) == 1


def test_stage_error_writes_json(tmp_path, capsys):
    p = _cfg(tmp_path, potential={"name": "square"})
    out = tmp_path / "err"
    assert main(["spectrum", str(p), "--out", str(out)]) == 2
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "HypothesisViolation" and err["stage"] == "spectrum"
    assert json.loads(capsys.readouterr().err.strip())["error"] == "HypothesisViolation"


def test_config_error_exit(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"mesh": {}, "potential": {"name": "harmonic"}, "solver": {"cg_tol": -1}}))
    assert main(["scan", str(p)]) == 2
    assert "solver.cg_tol" in capsys.readouterr().err


def test_scan_above_lambda_k_is_advisory(tmp_path):
    p = _cfg(tmp_path, window={"offsets": [0.02, 0.05]})
    out = tmp_path / "above"
    assert main(["scan", str(p), "--out", str(out)]) == 0
    rows = _rows(out / "report.csv")
    assert len(rows) == 2
    assert all("window=inapplicable" in r["certs"] for r in rows)
    assert all(float(r["margin"]) < 0 for r in rows)
    assert (out / "plots" / "scan.svg").exists()


@pytest.mark.slow
def test_solve_writes_solutions(tmp_path):
    p = _cfg(tmp_path, window={"offsets": [-0.02]})
    out = tmp_path / "solve"
    assert main(["solve", str(p), "--out", str(out)]) == 0
    (row,) = _rows(out / "report.csv")
    assert int(row["n_distinct"]) >= 3
    sols = sorted((out / "solutions").glob("sol_*.csv"))
    assert len(sols) >= 3
    assert list(_rows(sols[0])[0]) == ["x", "value"]
    run = json.loads((out / "run.json").read_text())
    assert max(run["results"]["rows"][0]["residuals"]) <= 1e-8


def test_geometry_and_nabla_commands(tmp_path):
    p = _cfg(tmp_path, window={"offsets": [-0.02]})
    assert main(["geometry", str(p), "--out", str(tmp_path / "g")]) == 0
    (g,) = _rows(tmp_path / "g" / "geometry.csv")
    assert float(g["margin"]) > 0
    assert main(["nabla-check", str(p), "--out", str(tmp_path / "n")]) == 0
    (n,) = _rows(tmp_path / "n" / "nabla.csv")
    assert n["nabla_inf"] == "" or float(n["nabla_inf"]) > 0
