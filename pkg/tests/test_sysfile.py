import json

import numpy as np
import pytest

from cddscert.sysfile import SystemFileError, bundled_path, dump_system, load_system, parse_system, system_to_dict

MINIMAL = {
    "name": "toy",
    "dimensions": {"n": 2, "nu": 1, "m": 0, "q": 0, "d": 0},
    "matrices": {"A1": [[0, 1], [-2, 0.1]], "A2": [[0], [1]], "A4": [[1, 0]], "A5": [[0]]},
}


def _text(doc):
    return json.dumps(doc, indent=2)


def test_minimal():
    s = parse_system(_text(MINIMAL))
    assert s.name == "toy" and s.n == 2 and s.nu == 1 and s.m == 0
    assert np.allclose(s.A1, [[0, 1], [-2, 0.1]])


@pytest.mark.parametrize("name", ["example1", "example2", "neutral3", "neutral3_dist"])
def test_bundled_round_trip(tmp_path, name):
    s = load_system(bundled_path(name))
    path = tmp_path / "s.json"
    dump_system(s, path)
    t = load_system(path)
    for k in ("A1", "A2", "A4", "A5", "D1", "C1", "C2", "D2"):
        assert np.array_equal(getattr(s, k), getattr(t, k))
    assert np.array_equal(s.A3.coeffs, t.A3.coeffs) and s.d == t.d
    assert system_to_dict(t) == system_to_dict(s)


def test_bundled_missing():
    with pytest.raises(FileNotFoundError):
        bundled_path("nope")


def test_malformed_json_location():
    with pytest.raises(SystemFileError, match=r"^f\.json:3:\d+:"):
        parse_system('{\n  "name": "x",\n  "dimensions": {,}\n}', "f.json")


@pytest.mark.parametrize("mutate, pattern", [
    (lambda d: d.update(extra=1), "unknown field 'extra'"),
    (lambda d: d["matrices"].update(A9=[[1]]), "unknown matrix 'A9'"),
    (lambda d: d["dimensions"].update(k=1), "unknown dimension 'k'"),
    (lambda d: d["dimensions"].update(n=-1), "nonnegative integer"),
    (lambda d: d["matrices"].pop("A2"), "matrix 'A2' is required"),
    (lambda d: d["matrices"].update(A1=[[1, 2, 3]]), r"A1 has shape \(1, 3\)"),
    (lambda d: d["matrices"].update(A1=[[1, "a"], [0, 1]]), "not a numeric array"),
    (lambda d: d["matrices"].update(A5=[[1.0]]), "rho"),
    (lambda d: d.update(form="odd"), "form must be"),
    (lambda d: d["matrices"].update(A3={"poly_r": [[[0]]], "x": 1}), "exactly one of"),
    (lambda d: d["matrices"].update(D1=[[1], [0]]), r"D1 has shape \(2, 1\), expected \(2, 0\)"),
])
def test_errors(mutate, pattern):
    doc = json.loads(json.dumps(MINIMAL))
    mutate(doc)
    with pytest.raises(SystemFileError, match=pattern):
        parse_system(_text(doc), "sys.json")


def test_error_points_at_offending_key():
    doc = json.loads(json.dumps(MINIMAL))
    doc["matrices"]["A2"] = [[0], [1], [2]]
    text = _text(doc)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if '"A2"' in ln)
    with pytest.raises(SystemFileError, match=rf"^sys\.json:{line}:"):
        parse_system(text, "sys.json")


def test_kernel_degree_too_high():
    doc = json.loads(json.dumps(MINIMAL))
    doc["matrices"]["A3"] = {"monomial_kernel": [[[0], [0]], [[1], [0]]]}
    with pytest.raises(SystemFileError, match="exceeds d"):
        parse_system(_text(doc))
    doc["dimensions"]["d"] = 1
    s = parse_system(_text(doc))
    assert s.A3.shape == (2, 2)


def test_neutral_form():
    doc = {
        "form": "neutral",
        "dimensions": {"n": 1, "m": 1, "q": 1, "d": 0},
        "matrices": {"A1": [[-1]], "A2": [[0.2]], "A4": [[0.5]], "D1": [[1]], "C1": [[1]], "C2": [[0.3]]},
    }
    s = parse_system(_text(doc))
    assert np.allclose(s.A2, [[-0.5 + 0.2]]) and np.allclose(s.A5, [[0.5]]) and np.allclose(s.C2, [[0.8]])
    doc["matrices"]["A5"] = [[0]]
    with pytest.raises(SystemFileError, match="unknown matrix 'A5'"):
        parse_system(_text(doc))
    doc["matrices"].pop("A5")
    doc["dimensions"]["nu"] = 2
    with pytest.raises(SystemFileError, match="nu = n"):
        parse_system(_text(doc))


def test_unreadable(tmp_path):
    with pytest.raises(SystemFileError, match="cannot read"):
        load_system(tmp_path / "absent.json")
