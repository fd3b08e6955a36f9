import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from geoprox.cli import parse_preset, parse_value, run_cli

DEMO = Path(__file__).resolve().parents[1] / "demos" / "configs"


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_certify_prox_c2():
    code, out, _ = cli("certify", "prox", "--c", "2")
    assert code == 0
    doc = json.loads(out)
    assert (doc["alpha"], doc["eps"]) == (0.5, 0.0)


def test_certify_builders():
    doc = json.loads(cli("certify", "km", "--beta", "0.5")[1])
    assert doc["alpha"] == pytest.approx(0.25)
    doc = json.loads(cli("certify", "cyclic", "--n", "3")[1])
    assert doc["alpha"] == pytest.approx(0.75) and doc["closed_form_alpha"] == pytest.approx(2 / 3)
    doc = json.loads(cli("certify", "compose", "--alpha0", "0.5", "--alpha1", "0.5")[1])
    assert doc["alpha"] == pytest.approx(2 / 3)
    doc = json.loads(cli("certify", "prox", "--kappa", "1", "--delta", str(math.pi / 8))[1])
    assert doc["c"] == pytest.approx(math.pi / 2) and doc["limit"]["alpha"] == 0.5
    doc = json.loads(cli("certify", "operator", "--preset", "two_halfspaces")[1])
    assert doc["certificate"]["alpha"] == pytest.approx(2 / 3)
    assert cli("certify", "km")[0] == 2


def test_rate_command():
    code, out, _ = cli("rate", "--alpha", "0.5", "--eps", "0", "--mu", "2")
    doc = json.loads(out)
    assert code == 0 and doc["gamma"] == pytest.approx(math.sqrt(3) / 2)
    assert doc["validity"] == "Valid" and doc["mu_upper"] is None


def test_barycenter_command():
    code, out, _ = cli("barycenter", "--points", "[[0, 0], [4, 0]]", "--weights", "[0.9, 0.1]",
                       "--p", "3")
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["point"], [1.0, 0.0], atol=1e-12)
    code, out, _ = cli("barycenter", "--points", "[[1,0,0],[0,1,0],[0,0,1]]", "--kappa", "1")
    np.testing.assert_allclose(json.loads(out)["point"], np.full(3, 1 / math.sqrt(3)), atol=1e-12)
    assert cli("barycenter", "--points", "oops")[0] == 2


def test_run_writes_trace_and_report(tmp_path):
    code, _, _ = cli("run", "--preset", "two_halfspaces(pi/4)", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "trace.csv").open()))
    assert list(rows[0]) == ["k", "x0", "x1", "residual", "dist_to_fix", "ratio"]
    tail = [float(r["ratio"]) for r in rows[len(rows) // 2:] if r["ratio"]]
    assert np.all(np.abs(np.array(tail) - 0.5) <= 0.01)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["name"] == "two_halfspaces"
    assert report["rate"]["verdict"] == "PASS"


def test_run_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli("run", "--config", str(DEMO / "two_balls.json"), "--out", str(d))[0] == 0
    for name in ("trace.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_json_to_stdout():
    code, out, _ = cli("run", "--preset", "cyclic_projections", "--param", "n=3", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["stop_reason"] == "ResidualBelow"
    assert doc["trace"]["columns"][0] == "k"


def test_estimate_command():
    code, out, _ = cli("estimate", "--preset", "two_halfspaces", "--alpha", "0.5", "--alpha", "0.9")
    doc = json.loads(out)
    assert code == 0 and doc["firmness"]["alphas"] == [0.5, 0.9]
    assert max(doc["firmness"]["eps"]) <= 1e-8
    assert doc["quasi_strict"]["holds"] and doc["subregularity"]["mu"] > 0


def test_domain_escape_exit_code(tmp_path):
    doc = json.loads((DEMO / "sphere_prox_chain.json").read_text())
    far = [math.sin(0.3), 0.0, math.cos(0.3)]
    doc["functions"]["pull"]["anchor"] = far
    doc["fixed_set"] = {"type": "unknown"}
    path = tmp_path / "escape.json"
    path.write_text(json.dumps(doc))
    code, _, _ = cli("run", "--config", str(path), "--out", str(tmp_path / "o"))
    assert code == 3
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["stop_reason"] == "DomainEscape"


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "schema": "geoprox-config/1",\n  "space": }')
    code, _, err = cli("run", "--config", str(bad))
    assert code == 2 and "line 3" in err
    doc = json.loads((DEMO / "two_balls.json").read_text())
    doc["space"]["dim"] = -1
    bad.write_text(json.dumps(doc))
    code, _, err = cli("run", "--config", str(bad))
    assert code == 2 and "space.dim" in err
    assert cli("run", "--preset", "nope")[0] == 2
    assert cli("run")[0] == 2
    assert cli("frobnicate")[0] == 2


def test_verify_subset():
    code, out, _ = cli("verify", "--samples", "50", "--only", "two_point_barycenter",
                       "--only", "fixed_point_intersection")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and len(doc["checks"]) == 2


def test_parameter_parsing():
    assert parse_value("pi/4") == pytest.approx(math.pi / 4)
    assert parse_value("3") == 3 and parse_value('"lines"') == "lines"
    assert parse_value("balls") == "balls"
    assert parse_value("__import__('os')") == "__import__('os')"
    name, params = parse_preset("cyclic_projections(3, variant=balls)", ["seed=4"])
    assert name == "cyclic_projections" and params == {"n": 3, "variant": "balls", "seed": 4}
