import json
import math
import subprocess
import sys

import pytest

from collapse_lab import cli
from collapse_lab._io import parse_csv


def call(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def report(argv, capsys):
    code, out, err = call(argv, capsys)
    assert code == 0, err
    return json.loads(out)


# --- classical ------------------------------------------------------------------

def test_classical_example(capsys):
    doc = report(["classical", "--m", "1", "--beta", "1", "--M", "0", "--E", "-1"], capsys)
    assert doc["schema"] == cli.REPORT_SCHEMA and doc["status"] == "ok"
    assert doc["outputs"]["t0"] == pytest.approx(0.7071068, abs=5e-8)
    assert doc["outputs"]["rmax"] == pytest.approx(1.0, rel=1e-15)
    assert doc["outputs"]["regime"] == "E_negative"


def test_classical_samples_csv(capsys):
    code, out, _ = call(["classical", "--E", "-1", "--points", "11", "--format", "csv"], capsys)
    assert code == 0
    head, cols, data = parse_csv(out)
    assert head.startswith("collapse-lab/orbit/1")
    assert cols == ["t", "r", "p_r", "energy"] and data.shape == (11, 4)
    assert data[0, 1] == 0.0 and data[-1, 1] == 0.0


def test_classical_no_collapse_exit_2(capsys):
    code, out, err = call(["classical", "--M", "2"], capsys)
    assert code == 2 and out == ""
    doc = json.loads(err)
    assert doc["status"] == "error" and doc["error"]["type"] == "CollapseConditionError"
    assert doc["error"]["margin"] == pytest.approx(-2.0)


# --- similarity commands ------------------------------------------------------------

def test_profile_defaults_to_alpha_thirty(capsys):
    doc = report(["profile", "--points", "5"], capsys)
    assert doc["outputs"]["alpha"] == pytest.approx(30.0, rel=1e-14)
    assert doc["outputs"]["branch"] == "outer_normalizable"
    assert len(doc["outputs"]["R"]) == 5


def test_alpha_and_beta_exclusive(capsys):
    code, _, err = call(["profile", "--alpha", "3", "--beta", "1"], capsys)
    assert code == 2
    assert json.loads(err)["error"]["type"] == "InvalidParameterError"


def test_ell_violation_exit_2(capsys):
    code, _, err = call(["profile", "--beta", "1", "--ell", "1"], capsys)
    assert code == 2
    assert json.loads(err)["error"]["type"] == "CollapseConditionError"


def test_unknown_command_exit_2(capsys):
    code, _, err = call(["sideways"], capsys)
    assert code == 2
    assert json.loads(err)["schema"] == cli.ERROR_SCHEMA


def test_divergent_norm_exit_3(capsys):
    code, _, err = call(["norm", "--alpha", "2.6457513110645907", "--mu", "-0.5", "--branch", "inner"], capsys)
    assert code == 3
    e = json.loads(err)["error"]
    assert e["type"] == "DivergenceError" and e["end"] == "infinity"


def test_norm_report(capsys):
    doc = report(["norm", "--alpha", "2.6457513110645907", "--mu", "0"], capsys)
    o = doc["outputs"]
    assert o["exponent"] == 1.5
    assert o["fit"]["exponent"] == pytest.approx(1.5, abs=1e-12)
    assert o["N_xi"] == pytest.approx(o["N_xi_identity"], rel=1e-10)
    assert o["abs_err"] > 0


def test_energy_report_keys(capsys):
    doc = report(["energy", "--alpha", "2.6457513110645907"], capsys)
    o = doc["outputs"]
    for k in ("re_I", "im_I", "identity_deviation", "im_ratio", "abs_err"):
        assert k in o
    assert abs(o["identity_deviation"]) < 1e-9


def test_means_report(capsys):
    doc = report(["means", "--alpha", "2.6457513110645907", "--points", "5"], capsys)
    o = doc["outputs"]
    assert o["expected_exponent_i"] == 3.0
    assert o["scale_product_fit_i"]["exponent"] == pytest.approx(3.0, abs=1e-9)
    # divergent spreads survive the JSON round trip as strings
    assert o["reports_ii"][0]["delta_pr"] == "inf"


def test_residual_report(capsys):
    doc = report(["residual", "--alpha", "2.6457513110645907", "--points", "40", "--t-points", "8"], capsys)
    assert doc["outputs"]["ode_max"] < 1e-8 and doc["outputs"]["pde_max"] < 1e-8


def test_csv_refused_without_table(capsys):
    code, _, _ = call(["classical", "--format", "csv"], capsys)
    assert code == 2


# --- figures -------------------------------------------------------------------------

def test_fig1_csv(capsys):
    code, out, _ = call(["figures", "--fig", "1", "--points", "50", "--format", "csv"], capsys)
    assert code == 0
    head, cols, data = parse_csv(out)
    assert head.startswith("collapse-lab/fig1/1")
    assert cols == ["window", "xi", "abs_R", "re_R", "im_R"]
    w0 = data[data[:, 0] == 0]
    w1 = data[data[:, 0] == 1]
    assert w0[0, 1] == 1.0 and w0[-1, 1] == 10.0
    assert w1[0, 1] == 1e-16 and w1[-1, 1] == pytest.approx(1e-15, rel=1e-15)


def test_fig1_report_checks(capsys):
    doc = report(["figures", "--fig", "1", "--points", "20"], capsys)
    for w in ("window_0", "window_1"):
        assert doc["outputs"][w]["interlaced"] and doc["outputs"][w]["monotone"]


def test_fig2_csv_deterministic(capsys, monkeypatch):
    argv = ["figures", "--fig", "2", "--alphas", "2.6457,10,20,30", "--points", "120", "--format", "csv"]
    monkeypatch.setenv("COLLAPSE_LAB_THREADS", "4")
    _, a, _ = call(argv, capsys)
    monkeypatch.setenv("COLLAPSE_LAB_THREADS", "1")
    _, b, _ = call(argv, capsys)
    assert a == b
    _, cols, data = parse_csv(a)
    assert cols == ["alpha", "log10_xi", "log10_abs_R2"]
    assert data.shape == (480, 3)
    assert "e" in a.splitlines()[2]


def test_out_file_written(tmp_path, capsys):
    path = tmp_path / "sub" / "orbit.json"
    code, out, _ = call(["classical", "--E", "-1", "--out", str(path)], capsys)
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["outputs"]["rmax"] == 1.0


# --- reports -------------------------------------------------------------------------

def test_empty_report():
    doc = json.loads(cli.emit_report(None, {}, {}))
    assert doc["schema"] == cli.REPORT_SCHEMA
    assert doc["inputs"] == {} and doc["outputs"] == {}
    spec, outputs = cli.spec_from_report(cli.emit_report("profile", {}, None))
    assert spec.command == "profile" and outputs == {}


def test_report_round_trip_values():
    outputs = {"z": 1 - 2j, "big": math.inf, "nan": math.nan, "xs": [1.5, -2.0], "nested": {"k": 3}}
    spec, back = cli.spec_from_report(cli.emit_report("norm", {"alpha": 3.0, "format": "json"}, outputs))
    assert back["z"] == 1 - 2j and back["big"] == math.inf and math.isnan(back["nan"])
    assert back["xs"] == [1.5, -2.0] and back["nested"] == {"k": 3}
    assert spec.params == {"alpha": 3.0} and spec.format == "json"


def test_report_reruns_to_identical_output(capsys):
    argv = ["norm", "--alpha", "10", "--mu", "0.25", "--points", "7"]
    code, first, _ = call(argv, capsys)
    spec, outputs = cli.spec_from_report(first)
    code, second, _ = call(cli.argv_from_spec(spec), capsys)
    assert code == 0 and second == first
    assert outputs["exponent"] == 2.0


def test_foreign_report_rejected():
    from collapse_lab.errors import InvalidParameterError
    with pytest.raises(InvalidParameterError):
        cli.spec_from_report(json.dumps({"schema": "other"}))


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "collapse_lab.cli", "classical", "--E", "-0.5", "--M", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["outputs"]["t0"] == pytest.approx(1.0)
