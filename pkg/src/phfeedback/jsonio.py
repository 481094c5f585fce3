"""JSON encoding of systems, feedbacks and reports.

Matrices are objects ``{"rows", "cols", "re", "im"}`` with row-major
entry lists; nested real arrays are accepted on input.  Floats are written
with ``repr`` precision, so every decoder here inverts its encoder exactly.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .linalg import DimensionError, TolerancePolicy
from .model import FeedbackSolution, GeneralPHDAE, SimplifiedPHDAE
from .verify import PencilReport


class InputFormatError(ValueError):
    """A file does not describe a valid object."""


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputFormatError(f"{where}: expected a number, got {v!r}")
    return float(v)


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {
        "rows": int(M.shape[0]), "cols": int(M.shape[1]),
        "re": [float(v) for v in M.real.ravel()],
        "im": [float(v) for v in M.imag.ravel()],
    }


def matrix_from_json(obj, name="matrix") -> np.ndarray:
    if isinstance(obj, list):
        try:
            A = np.array(obj, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"{name}: nested array is not numeric/rectangular") from exc
        if A.ndim == 1 and A.size == 0:
            return np.zeros((0, 0), dtype=complex)
        if A.ndim != 2:
            raise InputFormatError(f"{name}: nested array must be 2-D, got {A.ndim}-D")
        return A.astype(complex)
    if not isinstance(obj, dict):
        raise InputFormatError(f"{name}: expected a matrix object or nested array")
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{name}: needs integer 'rows' and 'cols'") from exc
    if rows < 0 or cols < 0:
        raise InputFormatError(f"{name}: negative size")
    re = obj.get("re")
    im = obj.get("im", [0.0] * (rows * cols))
    if not isinstance(re, list) or not isinstance(im, list):
        raise InputFormatError(f"{name}: 're' and 'im' must be arrays")
    re = np.array(re, dtype=object).ravel() if re and isinstance(re[0], list) else re
    im = np.array(im, dtype=object).ravel() if im and isinstance(im[0], list) else im
    if len(re) != rows * cols or len(im) != rows * cols:
        raise InputFormatError(f"{name}: expected {rows * cols} entries, got re={len(re)}, im={len(im)}")
    vals = np.array([_num(a, name) for a in re]) + 1j * np.array([_num(b, name) for b in im])
    M = vals.reshape(rows, cols) if rows * cols else np.zeros((rows, cols), dtype=complex)
    if not np.all(np.isfinite(M)):
        raise InputFormatError(f"{name}: non-finite entries")
    return M


_SIMPLE = ("E", "J", "R", "B")
_GENERAL = ("E", "Q", "J", "R", "B", "P", "S", "N")


def system_to_json(sys) -> dict:
    if isinstance(sys, SimplifiedPHDAE):
        d = {"kind": "simplified", "n": sys.n, "m": sys.m}
        names = _SIMPLE
    elif isinstance(sys, GeneralPHDAE):
        d = {"kind": "general", "l": sys.l, "n": sys.n, "m": sys.m}
        names = _GENERAL
    else:
        raise TypeError(f"cannot encode {type(sys).__name__}")
    for k in names:
        d[k] = matrix_to_json(getattr(sys, k))
    return d


def system_from_json(d: dict):
    if not isinstance(d, dict):
        raise InputFormatError("system file must hold a JSON object")
    kind = d.get("kind", "simplified")
    names = {"simplified": _SIMPLE, "general": _GENERAL}.get(kind)
    if names is None:
        raise InputFormatError(f"unknown system kind {kind!r}")
    missing = [k for k in names if k not in d]
    if missing:
        raise InputFormatError(f"{kind} system is missing {missing}")
    mats = {k: matrix_from_json(d[k], k) for k in names}
    try:
        sys = SimplifiedPHDAE(**mats) if kind == "simplified" else GeneralPHDAE(**mats)
    except DimensionError as exc:
        raise InputFormatError(str(exc)) from exc
    for key in ("n", "m", "l"):
        if key in d and hasattr(sys, key) and int(d[key]) != getattr(sys, key):
            raise InputFormatError(f"declared {key} = {d[key]} but matrices give {getattr(sys, key)}")
    return sys


def to_plain(x):
    """JSON-ready copy of nested results (numpy scalars, complex numbers, matrices)."""
    if isinstance(x, dict):
        return {str(k): to_plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return matrix_to_json(x if x.ndim == 2 else x.reshape(-1, 1))
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, PencilReport):
        return report_to_json(x)
    if hasattr(x, "__dataclass_fields__"):
        return {k: to_plain(getattr(x, k)) for k in x.__dataclass_fields__}
    return x


def report_to_json(r: PencilReport) -> dict:
    return {
        "regular": bool(r.regular),
        "regular_method": r.regular_method,
        "index": None if r.index is None else int(r.index),
        "finite_eigs": [[float(z.real), float(z.imag)] for z in r.finite_eigs],
        "stable": bool(r.stable),
        "index_le_1": bool(r.index_le_1),
        "max_real": None if r.max_real is None else float(r.max_real),
        "margins": to_plain(r.margins),
        "axis_semisimple": r.axis_semisimple,
        "tolerances": None if r.tolerances is None else {k: float(v) for k, v in r.tolerances.items()},
    }


def report_from_json(d: dict) -> PencilReport:
    try:
        return PencilReport(
            regular=bool(d["regular"]),
            regular_method=str(d["regular_method"]),
            index=None if d["index"] is None else int(d["index"]),
            finite_eigs=[complex(a, b) for a, b in d["finite_eigs"]],
            stable=bool(d["stable"]),
            index_le_1=bool(d["index_le_1"]),
            max_real=None if d["max_real"] is None else float(d["max_real"]),
            margins=dict(d.get("margins", {})),
            axis_semisimple=str(d.get("axis_semisimple", "n/a")),
            tolerances=d.get("tolerances"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"malformed pencil report: {exc}") from exc


def feedback_to_json(fb: FeedbackSolution, tol: TolerancePolicy | None = None) -> dict:
    d = {
        "problem": fb.problem,
        "F_S": matrix_to_json(fb.F_S),
        "F_H": matrix_to_json(fb.F_H),
        "K": None if fb.K is None else matrix_to_json(fb.K),
        "rank_target": fb.rank_target,
        "tolerances": None if tol is None else tol.to_dict(),
        "certificate": None if fb.certificate is None else report_to_json(fb.certificate),
        "details": to_plain(fb.details),
    }
    return d


def feedback_from_json(d: dict) -> FeedbackSolution:
    if not isinstance(d, dict) or "F_S" not in d or "F_H" not in d:
        raise InputFormatError("feedback file needs F_S and F_H")
    K = d.get("K")
    cert = d.get("certificate")
    try:
        return FeedbackSolution(
            matrix_from_json(d["F_S"], "F_S"), matrix_from_json(d["F_H"], "F_H"),
            None if K is None else matrix_from_json(K, "K"),
            str(d.get("problem", "")),
            None if d.get("rank_target") is None else int(d["rank_target"]),
            None if cert is None else report_from_json(cert),
            dict(d.get("details") or {}),
        )
    except DimensionError as exc:
        raise InputFormatError(str(exc)) from exc


def dumps(obj) -> str:
    """Canonical text form (sorted keys, full float precision)."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True)


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON ({exc})") from exc


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_system(path):
    return system_from_json(read_json(path))


def load_feedback(path) -> FeedbackSolution:
    return feedback_from_json(read_json(path))


def isclose_json(a, b) -> bool:
    """Structural equality of decoded JSON with NaN == NaN."""
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(isclose_json(a[k], b[k]) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(isclose_json(x, y) for x, y in zip(a, b))
    return a == b
