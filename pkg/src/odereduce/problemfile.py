"""JSON problem files: schema, validation and conversion to problem records.

Expression values are strings in the expression grammar (numbers are also
accepted).  Variables by field:

* ``equation``: x, y, yp, ypp (the original equation, "= 0" implied)
* ``p``, ``P``, ``h``, class coefficients of the reducible classes: x
* ``f`` (chebyshev_type): y, y_t
* quasilinear ``a2``, ``a1``, ``a0``, ``mu``: x, z, zp (x only when ``linear``)
* ``fspec.expr``: y
* ``expected[].y``, ``references[].y``: x
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

from .closedform import ForcingSpec
from .errors import ExprError, ProblemFileError
from .expr import Expr, parse
from .fsubst import FSpec
from .problem import KINDS, InitialConditions, OdeProblem, parse_number

_NUM = {"type": ["number", "string"]}
_EXPR = {"type": ["string", "number"]}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

_TERM = {
    "type": "object",
    "properties": {"A": _NUM, "k": {"enum": [0, 1, 2]}, "a": _NUM, "b": _NUM,
                   "kind": {"enum": ["one", "cos", "sin"]}},
    "required": ["A"],
    "additionalProperties": False,
}

_CHECK = {
    "type": "object",
    "properties": {
        "label": {"type": "string"},
        "y": _EXPR,
        "equation": _EXPR,
        "interval": _PAIR,
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "kind": {"enum": ["sup", "residual"]},
        "informational": {"type": "boolean"},
        "note": {"type": "string"},
    },
    "required": ["label", "y"],
    "additionalProperties": False,
}

_FI_REF = {
    "type": "object",
    "properties": {"label": {"type": "string"}, "phi": _EXPR,
                   "tol": {"type": "number", "exclusiveMinimum": 0},
                   "informational": {"type": "boolean"}, "note": {"type": "string"}},
    "required": ["label", "phi"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "class": {"enum": list(KINDS)},
        "description": {"type": "string"},
        "domain": _PAIR,
        "x0": {"type": "number"},
        "ics": {
            "type": "object",
            "properties": {"x": {"type": "number"}, "y": {"type": "number"},
                           "yp": {"type": "number"}},
            "required": ["x", "y", "yp"],
            "additionalProperties": False,
        },
        "equation": _EXPR,
        "p": _EXPR, "P": _EXPR, "f": _EXPR, "h": _EXPR,
        "a2": _EXPR, "a1": _EXPR, "a0": _EXPR,
        "alpha": _NUM, "beta": _NUM,
        "forcing": {"type": "array", "items": _TERM},
        "fspec": {
            "type": "object",
            "properties": {"kind": {"enum": ["exp_y", "half_square", "custom"]},
                           "expr": _EXPR, "interval": _PAIR,
                           "branch": {"enum": ["positive", "negative"]}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "constants": _PAIR,
        "mu": _EXPR,
        "linear": {"type": "boolean"},
        "box": {"type": "array", "items": _PAIR, "minItems": 3, "maxItems": 3},
        "anchor": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "span": _PAIR,
        "first_integrals": {"type": "array", "items": _FI_REF},
        "check": {
            "type": "object",
            "properties": {"interval": _PAIR, "grid": {"type": "integer", "minimum": 2}},
            "additionalProperties": False,
        },
        "expected": {"type": "array", "items": _CHECK},
        "references": {"type": "array", "items": _CHECK},
        "tolerances": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in
                           ("residual", "ic", "drift", "integrator", "sup", "exactness",
                            "independent")},
            "additionalProperties": False,
        },
        "functional": {
            "type": "object",
            "properties": {"p": _EXPR, "h": _EXPR, "interval": _PAIR},
            "required": ["p", "h"],
            "additionalProperties": False,
        },
    },
    "required": ["class", "domain"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {"residual": 1e-6, "ic": 1e-9, "drift": 1e-6, "integrator": 1e-9,
                      "sup": 1e-7, "exactness": 1e-8, "independent": 1e-6}

_REQUIRED = {
    "chebyshev_type": ("p", "f"),
    "linear_weighted": ("P", "alpha", "beta"),
    "f_type": ("a0", "fspec"),
    "quasilinear": ("a2", "a1", "a0"),
}


@dataclass
class Check:
    label: str
    y: Expr
    interval: Optional[tuple[float, float]] = None
    tol: Optional[float] = None
    equation: Optional[Expr] = None
    kind: str = "sup"
    informational: bool = False
    note: str = ""


@dataclass
class ProblemSpec:
    """A loaded problem file."""

    name: str
    kind: str
    raw: dict
    problem: Optional[OdeProblem] = None
    description: str = ""
    check_interval: Optional[tuple[float, float]] = None
    grid: Optional[int] = None
    expected: list = field(default_factory=list)
    references: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    quasi: Optional[dict] = None
    functional: Optional[dict] = None
    source: Optional[str] = None


def _expr(data: dict, key: str, variables, where: str = "") -> Optional[Expr]:
    if key not in data:
        return None
    text = data[key]
    try:
        return parse(str(text), variables)
    except ExprError as exc:
        raise ProblemFileError(f"field {where or key!r}: {exc.message}", operation="load",
                               field=where or key, value=str(text)) from None


def _number(data: dict, key: str):
    if key not in data:
        return None
    try:
        return parse_number(data[key])
    except (ExprError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"field {key!r} is not a number: {exc}", operation="load",
                               field=key) from None


def _checks(items, where: str) -> list[Check]:
    out = []
    for i, item in enumerate(items or []):
        tag = f"{where}[{i}]"
        out.append(Check(
            item["label"], _expr(item, "y", ("x",), f"{tag}.y"),
            tuple(item["interval"]) if "interval" in item else None, item.get("tol"),
            _expr(item, "equation", ("x", "y", "yp", "ypp"), f"{tag}.equation"),
            item.get("kind", "sup"), item.get("informational", False), item.get("note", "")))
    return out


def validate(data: Any) -> None:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ProblemFileError(f"schema violation at {path}: {err.message}", operation="load",
                               path=path, violations=len(errors))


def load_problem_data(data: dict, name: Optional[str] = None,
                      source: Optional[str] = None) -> ProblemSpec:
    validate(data)
    kind = data["class"]
    missing = [k for k in _REQUIRED[kind] if k not in data]
    if kind == "f_type" and "p" not in data and "a2" not in data:
        missing.append("a2 (or p)")
    if missing:
        raise ProblemFileError(f"class {kind} requires fields {missing}", operation="load",
                               missing=missing)
    name = data.get("name") or name or "problem"
    spec = ProblemSpec(name, kind, data, description=data.get("description", ""),
                       source=source)
    spec.tolerances.update(data.get("tolerances", {}))
    if "check" in data:
        if "interval" in data["check"]:
            spec.check_interval = tuple(data["check"]["interval"])
        spec.grid = data["check"].get("grid")
    spec.expected = _checks(data.get("expected"), "expected")
    spec.references = _checks(data.get("references"), "references")
    if "functional" in data:
        fb = data["functional"]
        spec.functional = {"p": _expr(fb, "p", ("x",), "functional.p"),
                           "h": _expr(fb, "h", ("y",), "functional.h"),
                           "interval": tuple(fb.get("interval", data["domain"]))}

    domain = tuple(float(v) for v in data["domain"])
    ics = None
    if "ics" in data:
        ics = InitialConditions(float(data["ics"]["x"]), float(data["ics"]["y"]),
                                float(data["ics"]["yp"]))
    try:
        if kind == "quasilinear":
            spec.quasi = _quasi(data, domain, ics)
            return spec
        problem = OdeProblem(kind, domain, name=name, x0=data.get("x0"), ics=ics)
    except ValueError as exc:
        raise ProblemFileError(str(exc), operation="load") from None
    X = ("x",)
    problem.equation = _expr(data, "equation", ("x", "y", "yp", "ypp"))
    problem.constants = tuple(data["constants"]) if "constants" in data else None
    if "forcing" in data:
        problem.forcing = ForcingSpec.from_dicts(data["forcing"])
    if kind == "chebyshev_type":
        problem.p = _expr(data, "p", X)
        problem.a2 = _expr(data, "a2", X)
        problem.a1 = _expr(data, "a1", X)
        problem.f = _expr(data, "f", ("y", "y_t"))
    elif kind == "linear_weighted":
        problem.P = _expr(data, "P", X)
        problem.alpha = _number(data, "alpha")
        problem.beta = _number(data, "beta")
        problem.a2 = _expr(data, "a2", X)
        problem.a1 = _expr(data, "a1", X)
        problem.a0 = _expr(data, "a0", X)
        problem.h = _expr(data, "h", X)
        if (problem.h is None) != (problem.forcing is None):
            raise ProblemFileError("linear_weighted needs both h (in x) and forcing (in t), "
                                   "or neither", operation="load")
    elif kind == "f_type":
        problem.p = _expr(data, "p", X)
        problem.a2 = _expr(data, "a2", X)
        problem.a1 = _expr(data, "a1", X)
        problem.a0 = _expr(data, "a0", X)
        fs = data["fspec"]
        try:
            problem.fspec = FSpec(fs["kind"], _expr(fs, "expr", ("y",), "fspec.expr"),
                                  tuple(fs["interval"]) if "interval" in fs else None,
                                  fs.get("branch"))
        except ValueError as exc:
            raise ProblemFileError(f"fspec: {exc}", operation="load") from None
        if problem.p is None and problem.forcing is None:
            problem.forcing = ForcingSpec()
    spec.problem = problem
    return spec


def _quasi(data: dict, domain, ics) -> dict:
    linear = data.get("linear", False)
    names = ("x",) if linear else ("x", "z", "zp")
    out = {
        "linear": linear,
        "a2": _expr(data, "a2", names),
        "a1": _expr(data, "a1", names),
        "a0": _expr(data, "a0", names),
        "h": _expr(data, "h", ("x",)),
        "mu": _expr(data, "mu", ("x", "z", "zp")),
        "domain": domain,
        "box": tuple(tuple(b) for b in data["box"]) if "box" in data else None,
        "anchor": tuple(data["anchor"]) if "anchor" in data else (
            (ics.x, ics.y, ics.yp) if ics is not None else None),
        "span": tuple(data["span"]) if "span" in data else None,
        "first_integrals": [
            {"label": r["label"], "phi": _expr(r, "phi", ("x", "z", "zp"), "first_integrals.phi"),
             "tol": r.get("tol"), "informational": r.get("informational", False),
             "note": r.get("note", "")}
            for r in data.get("first_integrals", [])
        ],
    }
    if out["anchor"] is None:
        raise ProblemFileError("quasilinear problems need an anchor or ics", operation="load")
    if not linear and out["h"] is not None:
        raise ProblemFileError("h is only used with linear quasilinear problems",
                               operation="load")
    return out


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}", operation="load",
                               path=str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})",
                               operation="load", path=str(path)) from None
    return load_problem_data(data, name=path.name.split(".")[0], source=str(path))
