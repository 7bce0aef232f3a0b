"""JSON problem files: strict schema, loading and export.

A problem file is a single JSON object. Unknown keys are rejected at every
level so a typo such as ``"oders"`` fails loudly instead of being ignored.
Numbers are read and written with full double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

from .errors import ParseError, ProblemFileError
from .problem import ProblemSpec

__all__ = ["SCHEMA", "ProblemFile", "load", "loads", "dumps", "from_reference"]

_NUM = {"type": "number"}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracivp problem file",
    "type": "object",
    "additionalProperties": False,
    "required": ["orders", "initial_values", "horizon", "rhs"],
    "properties": {
        "name": {"type": "string"},
        "orders": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "initial_values": {"type": "array", "items": _NUM},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "rhs": {"type": "string", "minLength": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "grading": {"type": "number", "minimum": 1},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["picard", "step"]},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "existence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 2},
                "bound": {"type": "number", "minimum": 0},
                "on_domain_error": {"enum": ["raise", "skip"]},
            },
        },
        "flags": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "force": {"type": "boolean"},
                "fractional_reconstruction": {"type": "boolean"},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass
class ProblemFile:
    spec: ProblemSpec
    name: str = ""
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    existence: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)


def _position(text: str, index: int):
    line = text.count("\n", 0, index) + 1
    column = index - (text.rfind("\n", 0, index) + 1) + 1
    return line, column


def _locate(text: str, path) -> tuple:
    """Best-effort line/column of the key named by a JSON path."""
    index = 0
    for part in path:
        if isinstance(part, int):
            continue
        hit = text.find(json.dumps(part), index)
        if hit < 0:
            break
        index = hit
    return _position(text, index)


def loads(text: str, source: str = "<string>") -> ProblemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{source}: invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            # point at the offending key rather than its parent object
            known = set(err.schema.get("properties", {}))
            extra = [k for k in err.instance if k not in known]
            path = path + extra[:1]
        where = "/".join(str(p) for p in path) or "<root>"
        line, col = _locate(text, path)
        raise ProblemFileError(f"{source}: {where}: {err.message}", line, col)
    try:
        spec = ProblemSpec(tuple(data["orders"]), tuple(data["initial_values"]),
                           data["horizon"], data["rhs"])
    except ParseError as exc:
        line, col = _locate(text, ["rhs"])
        raise ProblemFileError(f"{source}: rhs: {exc}", line, col) from exc
    except ValueError as exc:
        raise ProblemFileError(f"{source}: {exc}") from exc
    return ProblemFile(
        spec=spec,
        name=data.get("name", ""),
        grid=dict(data.get("grid", {})),
        solver=dict(data.get("solver", {})),
        existence=dict(data.get("existence", {})),
        flags=dict(data.get("flags", {})),
    )


def load(path) -> ProblemFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text, str(path))


def dumps(pf: ProblemFile) -> str:
    spec = pf.spec
    data = {}
    if pf.name:
        data["name"] = pf.name
    data.update(
        orders=list(spec.orders),
        initial_values=list(spec.initial_values),
        horizon=spec.horizon,
        rhs=spec.rhs.source,
    )
    for key in ("grid", "solver", "existence", "flags"):
        if getattr(pf, key):
            data[key] = getattr(pf, key)
    return json.dumps(data, indent=2) + "\n"


def from_reference(problem) -> ProblemFile:
    """Problem file for a corpus entry, with the flags it needs to run."""
    flags = {}
    if problem.forced:
        flags["force"] = True
    if problem.fractional_reconstruction:
        flags["fractional_reconstruction"] = True
    return ProblemFile(spec=problem.spec, name=problem.name, flags=flags)
