import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from ciquant.cli import main
from ciquant.library import CHRIST_LEE
from ciquant.report import schema

ROOT = Path(__file__).resolve().parents[1]

INCONSISTENT = "[symbols]\nt : time\nq : variable\na, b : constant\n[hamiltonian]\n1/2*b^2\n[solution]\nq = a*cos(t) + b\n"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_christ_lee_text(capsys):
    code, out, _ = run_cli(capsys, "run", "christ-lee")
    assert code == 0
    assert "{a, b} = 1" in out and "PASS {r, p_r} = 1" in out
    assert "result: PASS" in out


def test_json_validates_and_matches_text(capsys):
    code, out, _ = run_cli(capsys, "run", "fermionic-oscillator", "--json")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema())
    _, text, _ = run_cli(capsys, "run", "fermionic-oscillator")
    for g in doc["golden"]:
        assert f"{g['bracket']} = {g['derived']}" in text
    for nz in doc["table"]["nonzero"]:
        assert f"{nz['pair']} = {nz['bracket']}" in text
    assert any("-1/2" in n for n in doc["notes"])
    assert "-1/2" in text


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "run", "bosonic-oscillator", "--oracle", "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    assert doc["oracle"]["pass"] and doc["oracle"]["max_deviation"] < 1e-6


def test_field_model_options(capsys):
    code, out, _ = run_cli(capsys, "run", "chiral-boson", "--modes", "2", "--box", "10", "--no-limits", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["parameters"]["N"] == 2 and doc["parameters"]["L"] == 10.0


def test_eta_schedule(capsys):
    code, out, _ = run_cli(capsys, "run", "free-particle", "--eta-schedule", "0.1", "0.01", "--json")
    doc = json.loads(out)
    assert code == 0
    assert doc["eta"]["exact_limit"] == [["0", "1"], ["-1", "0"]]
    assert len(doc["eta"]["schedule"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "chiral-boson", "--modes", "0"],
        ["run", "sigma-o2", "--box", "-1"],
        ["run", "no-such-model"],
        ["run", "christ-lee", "--tol", "-1"],
        ["run", "christ-lee", "--eta-schedule", "0.1"],
        ["run"],
        ["frobnicate"],
        ["verify-all", "--jobs", "0"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2
    assert capsys.readouterr().err


def test_bad_model_file_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.model"
    path.write_text(CHRIST_LEE.replace("[solution]", "[solutoin]"))
    code, _, err = run_cli(capsys, "run", str(path))
    assert code == 2 and "solutoin" in err


def test_derivation_error_exit_3(tmp_path, capsys):
    path = tmp_path / "inconsistent.model"
    path.write_text(INCONSISTENT)
    code, _, err = run_cli(capsys, "run", str(path))
    assert code == 3
    assert "model" in err and "identif" in err


def test_corrupted_golden_named(tmp_path, capsys):
    path = tmp_path / "corrupt.model"
    path.write_text(CHRIST_LEE.replace("{r, p_r} = 1", "{r, p_r} = 2"))
    code, out, _ = run_cli(capsys, "run", str(path))
    assert code == 1
    assert "FAIL {r, p_r}" in out
    code, out, _ = run_cli(capsys, "run", str(path), "--json")
    doc = json.loads(out)
    assert doc["failures"] == ["golden {r, p_r}: expected 2, derived 1"]
    _, text, _ = run_cli(capsys, "run", str(path))
    assert "failed: golden {r, p_r}: expected 2, derived 1" in text


def test_verify_all_with_corrupted_extra(tmp_path, capsys):
    path = tmp_path / "corrupt.model"
    path.write_text(CHRIST_LEE.replace("name = christ-lee", "name = corrupt").replace("{a, b} = 1", "{a, b} = 3"))
    code, out, _ = run_cli(capsys, "verify-all", "--json", "--extra", str(path), "--jobs", "4")
    doc = json.loads(out)
    jsonschema.validate(doc, schema())
    assert code == 1 and not doc["pass"]
    failed = [r for r in doc["models"] if not r["pass"]]
    assert [r["model"] for r in failed] == ["corrupt"]
    assert any("{a, b}" in f for f in failed[0]["failures"])


def test_schema_shipped_in_docs_matches_package():
    shipped = json.loads((ROOT / "docs" / "report.schema.json").read_text())
    packaged = json.loads(resources.files("ciquant").joinpath("report.schema.json").read_text())
    assert shipped == packaged == schema()
    jsonschema.Draft202012Validator.check_schema(shipped)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ciquant", "run", "christ-lee", "--json"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["model"] == "christ-lee"
