import json
import subprocess
import sys

import numpy as np
import pytest

from cddscert.cli import (EXIT_FAIL, EXIT_OK, EXIT_USAGE, certificate_from_dict, certificate_to_dict, main,
                          run_report)
from cddscert.sdp import parse_sdpa


def _keys(obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield str(k)
            yield from _keys(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _keys(v)


def _run(*argv):
    return main([str(a) for a in argv])


def test_check_range_certified_and_report(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code = _run("check", "--system", "example1", "--r1", 0.3, "--r2", 1.2, "--lambda1", 1, "--d", 2,
                "--delta7", 1, "--delta8", 0, "--report", rep)
    assert code == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["command"] == "check" and doc["result"]["verdict"] == "certified"
    assert doc["certificate"]["interval"] == [0.3, 1.2]
    assert not [k for k in _keys({k: v for k, v in doc.items() if k != "timing"}) if "seconds" in k]
    assert doc["timing"]
    assert "certified" in capsys.readouterr().out


def test_reports_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["check", "--system", "example1", "--r0", 1.0, "--d", 1]
    assert _run(*args, "--report", a) == EXIT_OK
    assert _run(*args, "--report", b) == EXIT_OK
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da.pop("timing"), db.pop("timing")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)


def test_check_not_certified():
    assert _run("check", "--system", "example1", "--r1", 0.05, "--r2", 0.09, "--lambda1", 1, "--d", 2) == EXIT_FAIL


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "name": 1,\n  "dimensions": [\n')
    assert _run("check", "--system", bad, "--r0", 1.0) == EXIT_USAGE
    assert "bad.json:" in capsys.readouterr().err
    assert _run("check", "--system", "example1") == EXIT_USAGE
    assert _run("check", "--system", "example1", "--r0", 1, "--r1", 0.1, "--r2", 1) == EXIT_USAGE
    assert _run("check", "--system", "example1", "--r1", 1.0, "--r2", 0.5) == EXIT_USAGE
    assert _run("min-gamma", "--system", "example1", "--r0", 1.0) == EXIT_USAGE
    assert "no disturbance channel" in capsys.readouterr().err
    assert _run("check", "--system", "example1", "--r0", 1.0, "--supply", "l2gain:abc") == EXIT_USAGE
    assert _run("verify", "--system", "example1", "--r", 1.0, "--mode", "dissipation") == EXIT_USAGE
    assert _run("margin", "--system", "example1", "--r0", 1.0, "--direction", "down", "--limit", 3.0) == EXIT_USAGE
    assert _run("hierarchy", "--system", "example1", "--r0", 1.0, "--dmin", 3, "--dmax", 2) == EXIT_USAGE
    assert _run("nonsense") == EXIT_USAGE


def test_unknown_matrix_in_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"dimensions": {"n": 1, "nu": 1, "m": 0, "q": 0, "d": 0},
                             "matrices": {"A1": [[-1]], "A2": [[0]], "A4": [[0]], "A5": [[0]], "B7": [[1]]}}))
    assert _run("check", "--system", p, "--r0", 1.0) == EXIT_USAGE


def test_min_gamma_pointwise(tmp_path):
    rep = tmp_path / "g.json"
    assert _run("min-gamma", "--system", "neutral3", "--r0", 0.3, "--d", 1, "--report", rep) == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["result"]["gamma"] >= doc["result"]["gamma_lower"] > 0


def test_emit_sdpa(tmp_path):
    out = tmp_path / "p.dat-s"
    assert _run("check", "--system", "example1", "--r1", 0.3, "--r2", 1.2, "--lambda1", 1, "--d", 1,
                "--emit-sdpa", out) == EXIT_OK
    data = parse_sdpa(out)
    assert data.nvars > 0 and len(data.block_struct) >= 4


def test_margin(capsys):
    code = _run("margin", "--system", "example1", "--r0", 1.0, "--direction", "up", "--lambda1", 1, "--d", 2,
                "--delta7", 1, "--delta8", 0, "--tol", 0.1)
    assert code == EXIT_OK
    assert "certified interval: [1," in capsys.readouterr().out
    assert _run("margin", "--system", "example1", "--r0", 2.0, "--direction", "down", "--d", 1) == EXIT_FAIL


def test_verify_simulate_and_freqsweep(tmp_path, capsys):
    csv = tmp_path / "t.csv"
    assert _run("verify", "--system", "example1", "--r", 1.0, "--mode", "simulate", "--csv", csv) == EXIT_OK
    assert "decaying" in capsys.readouterr().out
    assert np.loadtxt(csv, delimiter=",", skiprows=2).shape[1] == 4
    assert _run("verify", "--system", "example1", "--r", 2.0, "--mode", "simulate", "--T", 60) == EXIT_FAIL
    rep = tmp_path / "f.json"
    assert _run("verify", "--system", "neutral3", "--r", 0.1, "--mode", "freqsweep", "--npoints", 300,
                "--report", rep) == EXIT_OK
    assert json.loads(rep.read_text())["peak"] == pytest.approx(0.101074, abs=1e-3)


def test_verify_dissipation_round_trip(tmp_path, capsys):
    rep = tmp_path / "c.json"
    assert _run("check", "--system", "neutral3", "--r0", 0.3, "--d", 1, "--supply", "l2gain:0.5",
                "--report", rep) == EXIT_OK
    code = _run("verify", "--system", "neutral3", "--r", 0.3, "--mode", "dissipation", "--certificate", rep,
                "--T", 3.0)
    assert code == EXIT_OK and "pass" in capsys.readouterr().out
    assert _run("verify", "--system", "neutral3", "--r", 0.4, "--mode", "dissipation", "--certificate", rep) \
        == EXIT_USAGE


def test_hierarchy(capsys):
    code = _run("hierarchy", "--system", "neutral3", "--r0", 0.3, "--dmin", 0, "--dmax", 1)
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "gamma nonincreasing: True" in out and "padding checks: pass" in out


def test_certificate_serialization(tmp_path):
    from cddscert.analysis import check_range
    from cddscert.builder import FunctionalDegrees
    from cddscert.model import DelayRange
    from cddscert.sysfile import bundled_path, load_system
    s = load_system(bundled_path("example2"))
    rep = check_range(s, DelayRange(0.5, 1.0), FunctionalDegrees(1, 0, 0), d=2)
    assert rep.certified
    doc = json.loads(json.dumps(run_report("check", {}, rep)))
    cert = certificate_from_dict(doc["certificate"])
    for r in (0.5, 0.75, 1.0):
        assert np.array_equal(cert.P(r), rep.certificate.P(r))
    assert certificate_to_dict(cert)["interval"] == [0.5, 1.0]


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "cddscert.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "cddscert" in out.stdout
