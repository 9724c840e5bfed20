"""JSON system files.

Layout::

    {
      "name": "...", "description": "...", "notes": ["..."],
      "form": "cdds" | "neutral",
      "dimensions": {"n": 2, "nu": 1, "m": 0, "q": 0, "d": 0},
      "matrices": {
        "A1": [[...]], "A2": [[...]], "A4": [[...]], "A5": [[...]],
        "D1": ..., "C1": ..., "C2": ..., "D2": ...,
        "A3": {"poly_r": [M0, M1, ...]} | {"monomial_kernel": [K0, K1, ...]},
        "C3": (same as A3)
      }
    }

``poly_r`` lists coefficient matrices of ``r`` (each ``rows x (d+1) nu``);
``monomial_kernel`` lists constant matrices multiplying ``tau**i`` (each
``rows x nu``).  In ``neutral`` form the file describes
``d/dt (x - A4 x(t-r)) = A1 x + A2 x(t-r) + int A3 x + D1 w`` with
``z = C1 x + C2 x(t-r) + int C3 x + D2 w``; ``nu`` must equal ``n`` and
``A5`` is not allowed.  Missing matrices are zero.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .model import CddsSystem, ModelError, from_neutral, monomial_kernel_to_legendre, validate
from .polymatrix import PolyMatrix

__all__ = ["SystemFileError", "parse_system", "load_system", "system_to_dict", "dump_system", "bundled_path"]

TOP_KEYS = {"name", "description", "notes", "form", "dimensions", "matrices"}
DIM_KEYS = {"n", "nu", "m", "q", "d"}
CONST_KEYS = ("A1", "A2", "A4", "A5", "D1", "C1", "C2", "D2")
KERNEL_KEYS = ("A3", "C3")


class SystemFileError(ValueError):
    """Malformed system file; the message carries ``source:line:col``."""


def bundled_path(name: str) -> Path:
    """Path of a bundled system file (``example1``, ``example2``, ``neutral3``, ``neutral3_dist``)."""
    p = Path(__file__).with_name("systems") / (name if name.endswith(".json") else name + ".json")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def _locator(text: str, source: str):
    def where(*path) -> str:
        # position of the innermost key found after its parents; best effort
        pos = 0
        for key in path:
            m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
            if m is None:
                break
            pos = m.start()
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        return f"{source}:{line}:{col}"
    return where


def _shape(value, rows: int, cols: int, loc: str, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"{loc}: {name} is not a numeric array ({exc})") from None
    if arr.size == 0 and rows * cols == 0:
        return np.zeros((rows, cols))
    if arr.ndim == 1 and cols == 1 and arr.size == rows:
        arr = arr.reshape(rows, 1)
    elif arr.ndim == 1 and rows == 1 and arr.size == cols:
        arr = arr.reshape(1, cols)
    if arr.shape != (rows, cols):
        raise SystemFileError(f"{loc}: {name} has shape {arr.shape}, expected ({rows}, {cols})")
    if not np.all(np.isfinite(arr)):
        raise SystemFileError(f"{loc}: {name} has non-finite entries")
    return arr


def _kernel(spec, rows: int, nu: int, d: int, where, name: str) -> PolyMatrix | None:
    loc = where("matrices", name)
    if spec is None:
        return None
    if not isinstance(spec, dict) or len(spec) != 1 or next(iter(spec)) not in ("poly_r", "monomial_kernel"):
        raise SystemFileError(f"{loc}: {name} must be an object with exactly one of 'poly_r', 'monomial_kernel'")
    kind, coeffs = next(iter(spec.items()))
    if not isinstance(coeffs, list) or not coeffs:
        raise SystemFileError(f"{where('matrices', name, kind)}: {name}.{kind} must be a nonempty list of matrices")
    if kind == "poly_r":
        e = (d + 1) * nu
        return PolyMatrix(np.stack([_shape(c, rows, e, where("matrices", name, kind), f"{name}.poly_r[{i}]")
                                    for i, c in enumerate(coeffs)]))
    mats = [_shape(c, rows, nu, where("matrices", name, kind), f"{name}.monomial_kernel[{i}]")
            for i, c in enumerate(coeffs)]
    if len(mats) - 1 > d:
        raise SystemFileError(f"{where('matrices', name, kind)}: kernel degree {len(mats) - 1} exceeds d = {d}")
    return monomial_kernel_to_legendre(mats, d, nu)


def parse_system(text: str, source: str = "<string>") -> CddsSystem:
    """Parse and validate a system file's contents."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    where = _locator(text, source)
    if not isinstance(doc, dict):
        raise SystemFileError(f"{source}:1:1: top level must be an object")
    for key in doc:
        if key not in TOP_KEYS:
            raise SystemFileError(f"{where(key)}: unknown field {key!r}")
    form = doc.get("form", "cdds")
    if form not in ("cdds", "neutral"):
        raise SystemFileError(f"{where('form')}: form must be 'cdds' or 'neutral', got {form!r}")
    dims = doc.get("dimensions")
    if not isinstance(dims, dict):
        raise SystemFileError(f"{where('dimensions')}: missing or malformed 'dimensions' object")
    for key in dims:
        if key not in DIM_KEYS:
            raise SystemFileError(f"{where('dimensions', key)}: unknown dimension {key!r}")
    for key in ("n", "m", "q", "d") + (("nu",) if form == "cdds" else ()):
        v = dims.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SystemFileError(f"{where('dimensions', key)}: dimension {key!r} must be a nonnegative integer")
    n, m, q, d = dims["n"], dims["m"], dims["q"], dims["d"]
    nu = dims.get("nu", n)
    if form == "neutral" and nu != n:
        raise SystemFileError(f"{where('dimensions', 'nu')}: neutral form needs nu = n")
    if n < 1 or nu < 1:
        raise SystemFileError(f"{where('dimensions')}: n and nu must be positive")
    mats = doc.get("matrices")
    if not isinstance(mats, dict):
        raise SystemFileError(f"{where('matrices')}: missing or malformed 'matrices' object")
    allowed = set(CONST_KEYS + KERNEL_KEYS) - ({"A5"} if form == "neutral" else set())
    for key in mats:
        if key not in allowed:
            raise SystemFileError(f"{where('matrices', key)}: unknown matrix {key!r}")
    shapes = {"A1": (n, n), "A2": (n, nu), "A4": (nu, n), "A5": (nu, nu), "D1": (n, q),
              "C1": (m, n), "C2": (m, nu), "D2": (m, q)}
    for key in ("A1", "A2", "A4") + (("A5",) if form == "cdds" else ()):
        if key not in mats:
            raise SystemFileError(f"{where('matrices')}: matrix {key!r} is required")
    M = {k: _shape(mats[k], *shapes[k], where("matrices", k), k) if k in mats else None for k in CONST_KEYS}
    A3 = _kernel(mats.get("A3"), n, nu, d, where, "A3")
    C3 = _kernel(mats.get("C3"), m, nu, d, where, "C3")
    name = str(doc.get("name", Path(source).stem))
    notes = doc.get("notes", [])
    if isinstance(notes, str):
        notes = [notes]
    if "description" in doc:
        notes = [str(doc["description"])] + list(notes)
    try:
        if form == "neutral":
            sys = from_neutral(M["A1"], M["A2"], M["A4"], A3=A3, D1=M["D1"], C1=M["C1"], C2=M["C2"],
                               C3=C3, D2=M["D2"], d=d, name=name)
            sys = CddsSystem(**{**_fields(sys), "notes": tuple(notes) + sys.notes})
        else:
            sys = CddsSystem(A1=M["A1"], A2=M["A2"], A4=M["A4"], A5=M["A5"], d=d, A3=A3, D1=M["D1"],
                             C1=M["C1"], C2=M["C2"], C3=C3, D2=M["D2"], name=name, notes=tuple(notes))
        if sys.m != m or sys.q != q:
            raise ModelError(f"declared m={m}, q={q} but matrices give m={sys.m}, q={sys.q}")
        validate(sys)
    except ModelError as exc:
        raise SystemFileError(f"{where('matrices')}: {exc}") from None
    return sys


def _fields(sys: CddsSystem) -> dict:
    return {k: getattr(sys, k) for k in ("A1", "A2", "A4", "A5", "d", "A3", "D1", "C1", "C2", "C3", "D2", "name")}


def load_system(path) -> CddsSystem:
    """Read and parse a system file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SystemFileError(f"{p}: cannot read ({exc.strerror})") from None
    return parse_system(text, str(p))


def system_to_dict(sys: CddsSystem) -> dict:
    """Coupled-form document for ``sys`` (kernels as ``poly_r``)."""
    doc = {
        "name": sys.name,
        "form": "cdds",
        "dimensions": {"n": sys.n, "nu": sys.nu, "m": sys.m, "q": sys.q, "d": sys.d},
        "matrices": {k: getattr(sys, k).tolist() for k in CONST_KEYS},
    }
    if sys.notes:
        doc["notes"] = list(sys.notes)
    for k in KERNEL_KEYS:
        pm = getattr(sys, k)
        if pm.coeffs.size and np.any(pm.coeffs != 0):
            doc["matrices"][k] = {"poly_r": pm.coeffs.tolist()}
    return doc


def dump_system(sys: CddsSystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n", encoding="utf-8")
