import json
import subprocess
import sys

import pytest

from pqctwistor import cli, suites
from pqctwistor.report import VerificationReport


def run(*args, env=None):
    import os
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "pqctwistor", *args], capture_output=True, env=e)


def test_algebra_suite_passes(capsys):
    assert cli.main(["algebra", "--seed", "1"]) == cli.EXIT_PASS
    out = capsys.readouterr().out
    assert out.strip().endswith("overall: PASS")
    assert all(line.startswith(("PASS", "FAIL", "overall")) for line in out.splitlines())


def test_structured_stdout_and_json_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert cli.main(["algebra", "--format", "structured", "--json", str(path)]) == 0
    out = capsys.readouterr().out
    assert out == path.read_text()
    rep = VerificationReport.from_json(out)
    assert rep.overall_pass and all(c.anchor for c in rep.checks)


@pytest.mark.parametrize("argv", [
    ["nosuch"], ["model", "--n", "0"], ["model", "--samples", "0"], ["model", "--seed", "-1"],
    ["model", "--tol", "0"], ["conformal", "--f", "poly:abc"], ["conformal", "--f", "exp:1"],
    ["model", "--config", "/nonexistent.ini"],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == cli.EXIT_USAGE


def test_bad_worker_env(monkeypatch):
    monkeypatch.setenv(suites.WORKERS_ENV, "many")
    assert cli.main(["algebra"]) == cli.EXIT_USAGE


def test_tol_override_can_fail_a_suite(capsys):
    assert cli.main(["algebra", "--tol", "1e-300"]) == cli.EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


def test_config_file(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[structure]\nseed = 5\nsamples = 10\n\n[tolerances]\nalgebra.cross_triple_product = 1e-300\n")
    assert cli.main(["algebra", "--config", str(ini), "--format", "structured"]) == cli.EXIT_FAIL
    d = json.loads(capsys.readouterr().out)
    rec = {c["check_id"]: c for c in d["checks"]}
    assert rec["algebra.cross_triple_product"]["threshold"] == 1e-300
    assert rec["algebra.cross_triple_product"]["samples"] == 10


def test_malformed_config(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[structure]\nn = two\n")
    assert cli.main(["model", "--config", str(ini)]) == cli.EXIT_USAGE


def test_emit_report_formats():
    r = VerificationReport()
    assert cli.emit_report(r, "text").endswith(b"\n")
    assert json.loads(cli.emit_report(r, "structured"))["overall_pass"] is True
    with pytest.raises(ValueError):
        cli.emit_report(r, "xml")


def test_module_entry_point_and_determinism(tmp_path):
    a, b = run("algebra", "--seed", "9", "--format", "structured"), run("algebra", "--seed", "9", "--format", "structured")
    assert a.returncode == 0 and a.stdout == b.stdout
    c = run("algebra", "--seed", "9", "--format", "structured", env={suites.WORKERS_ENV: "3"})
    assert c.stdout == a.stdout
    assert run("algebra", "--seed", "10", "--format", "structured").stdout != a.stdout


def test_unwritable_json_path():
    with pytest.raises(OSError):
        cli.main(["algebra", "--json", "/nonexistent/dir/r.json"])
