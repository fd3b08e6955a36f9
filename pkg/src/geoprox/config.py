"""JSON experiment configs: schema, parsing and serialization.

A config names a space, an operator tree, a start point and (optionally)
the fixed set, sampling recipe and certificate override.  Sets and
functions may be given inline or by name from the ``sets`` and
``functions`` tables.
"""

from __future__ import annotations

import json
import math
from typing import Any

import jsonschema
import numpy as np

from .certificates import Certificate
from .functions import Ball, Halfspace, Indicator, Linear, Power, ProxParams, Radial, Segment
from .harness import ExperimentConfig
from .operators import (Average, Compose, EmptySet, Identity, KM, KnownPoint, KnownSet,
                        PointMap, Project, Prox, Unknown)
from .regularity import BallRegion, BoxRegion, SampleSpec
from .spaces import DomainError, Euclidean, SphereCap

SCHEMA_VERSION = "geoprox-config/1"


class ConfigError(Exception):
    """Malformed or invalid experiment config."""


_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_ref_or = lambda inline: {"oneOf": [{"type": "string"}, inline]}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "geoprox experiment config",
    "type": "object",
    "required": ["schema", "space", "operator", "x0"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "params": {"type": "object"},
        "space": {"$ref": "#/$defs/space"},
        "sets": {"type": "object", "additionalProperties": {"$ref": "#/$defs/set"}},
        "functions": {"type": "object", "additionalProperties": {"$ref": "#/$defs/function"}},
        "operator": {"$ref": "#/$defs/operator"},
        "x0": _vec,
        "stop": {
            "type": "object", "additionalProperties": False,
            "properties": {"tol": {"type": "number", "exclusiveMinimum": 0},
                           "max_iter": {"type": "integer", "minimum": 0}},
        },
        "sampling": {"$ref": "#/$defs/sampling"},
        "fixed_set": {"$ref": "#/$defs/fixed_set"},
        "certificate": {
            "type": "object", "required": ["alpha", "eps"], "additionalProperties": False,
            "properties": {"alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                           "eps": {"type": "number", "minimum": 0}},
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"trace": {"type": "string"}, "report": {"type": "string"}},
        },
    },
    "$defs": {
        "space": {"oneOf": [
            {"type": "object", "required": ["kind", "dim"], "additionalProperties": False,
             "properties": {"kind": {"const": "euclidean"},
                            "dim": {"type": "integer", "minimum": 1}}},
            {"type": "object", "required": ["kind", "dim", "kappa", "center", "delta"],
             "additionalProperties": False,
             "properties": {"kind": {"const": "sphere_cap"},
                            "dim": {"type": "integer", "minimum": 1},
                            "kappa": {"type": "number", "exclusiveMinimum": 0},
                            "center": _vec,
                            "delta": {"type": "number", "exclusiveMinimum": 0}}},
        ]},
        "set": {"oneOf": [
            {"type": "object", "required": ["type", "center", "radius"], "additionalProperties": False,
             "properties": {"type": {"const": "ball"}, "center": _vec,
                            "radius": {"type": "number", "minimum": 0}}},
            {"type": "object", "required": ["type", "a", "b"], "additionalProperties": False,
             "properties": {"type": {"const": "segment"}, "a": _vec, "b": _vec}},
            {"type": "object", "required": ["type", "normal", "offset"], "additionalProperties": False,
             "properties": {"type": {"const": "halfspace"}, "normal": _vec,
                            "offset": {"type": "number"}}},
        ]},
        "profile": {"oneOf": [
            {"type": "object", "required": ["type", "slope"], "additionalProperties": False,
             "properties": {"type": {"const": "linear"},
                            "slope": {"type": "number", "minimum": 0}}},
            {"type": "object", "required": ["type", "exponent"], "additionalProperties": False,
             "properties": {"type": {"const": "power"},
                            "exponent": {"type": "number", "minimum": 1},
                            "coefficient": {"type": "number", "minimum": 0}}},
        ]},
        "function": {"oneOf": [
            {"type": "object", "required": ["type", "anchor", "profile"], "additionalProperties": False,
             "properties": {"type": {"const": "radial"}, "anchor": _vec,
                            "profile": {"$ref": "#/$defs/profile"}}},
            {"type": "object", "required": ["type", "set"], "additionalProperties": False,
             "properties": {"type": {"const": "indicator"},
                            "set": _ref_or({"$ref": "#/$defs/set"})}},
        ]},
        "operator": {"oneOf": [
            {"type": "object", "required": ["op"], "additionalProperties": False,
             "properties": {"op": {"const": "identity"}}},
            {"type": "object", "required": ["op", "set"], "additionalProperties": False,
             "properties": {"op": {"const": "project"}, "set": _ref_or({"$ref": "#/$defs/set"})}},
            {"type": "object", "required": ["op", "function", "lam"], "additionalProperties": False,
             "properties": {"op": {"const": "prox"},
                            "function": _ref_or({"$ref": "#/$defs/function"}),
                            "lam": {"type": "number", "exclusiveMinimum": 0},
                            "p": {"type": "number", "exclusiveMinimum": 1}}},
            {"type": "object", "required": ["op", "inner", "beta"], "additionalProperties": False,
             "properties": {"op": {"const": "km"}, "inner": {"$ref": "#/$defs/operator"},
                            "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}}},
            {"type": "object", "required": ["op", "ops"], "additionalProperties": False,
             "properties": {"op": {"const": "compose"},
                            "ops": {"type": "array", "minItems": 1,
                                    "items": {"$ref": "#/$defs/operator"}}}},
            {"type": "object", "required": ["op", "terms"], "additionalProperties": False,
             "properties": {"op": {"const": "average"},
                            "p": {"type": "number", "exclusiveMinimum": 1},
                            "terms": {"type": "array", "minItems": 1, "items": {
                                "type": "object", "required": ["operator", "weight"],
                                "additionalProperties": False,
                                "properties": {"operator": {"$ref": "#/$defs/operator"},
                                               "weight": {"type": "number", "exclusiveMinimum": 0}}}}}},
        ]},
        "sampling": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "count": {"type": "integer", "minimum": 1},
                "exclusion": {"type": ["number", "null"], "minimum": 0},
                "region": {"oneOf": [
                    {"type": "object", "required": ["type"], "additionalProperties": False,
                     "properties": {"type": {"const": "ball"},
                                    "center": {"oneOf": [_vec, {"type": "null"}]},
                                    "radius": {"type": ["number", "null"], "exclusiveMinimum": 0}}},
                    {"type": "object", "required": ["type", "lo", "hi"], "additionalProperties": False,
                     "properties": {"type": {"const": "box"}, "lo": _vec, "hi": _vec}},
                ]},
            },
        },
        "fixed_set": {"oneOf": [
            {"type": "object", "required": ["type", "point"], "additionalProperties": False,
             "properties": {"type": {"const": "point"}, "point": _vec}},
            {"type": "object", "required": ["type"], "additionalProperties": False,
             "properties": {"type": {"const": "intersection"},
                            "sets": {"type": "array",
                                     "items": _ref_or({"$ref": "#/$defs/set"})},
                            "points": {"type": "array", "items": _vec}}},
            {"type": "object", "required": ["type"], "additionalProperties": False,
             "properties": {"type": {"enum": ["empty", "unknown"]}}},
        ]},
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


# -- diagnostics --------------------------------------------------------------------

def _field(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _deepest(error):
    """Most specific sub-error of a ``oneOf`` failure (best guess at the culprit)."""
    best = error
    for sub in error.context or ():
        cand = _deepest(sub)
        if len(cand.absolute_path) > len(best.absolute_path) or best is error:
            best = cand
    return best


def validate(doc: Any) -> None:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = _deepest(errors[0])
        raise ConfigError(f"field {_field(err.absolute_path)}: {err.message}")


def loads(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config; errors carry a line or field location."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return loads(text)


# -- decoding -----------------------------------------------------------------------

def from_dict(doc: dict) -> ExperimentConfig:
    validate(doc)
    try:
        return _decode(doc)
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _decode(doc):
    sp = doc["space"]
    if sp["kind"] == "euclidean":
        space = Euclidean(sp["dim"])
    else:
        space = SphereCap(sp["dim"], sp["kappa"], sp["center"], sp["delta"])
    sets_tab = {k: _decode_set(v) for k, v in doc.get("sets", {}).items()}

    def get_set(v, where):
        if isinstance(v, str):
            if v not in sets_tab:
                raise ConfigError(f"field {where}: unknown set {v!r}")
            return sets_tab[v]
        return _decode_set(v)

    funcs_tab = {}
    for k, v in doc.get("functions", {}).items():
        funcs_tab[k] = _decode_function(v, lambda s: get_set(s, f"functions.{k}.set"))

    def get_func(v, where):
        if isinstance(v, str):
            if v not in funcs_tab:
                raise ConfigError(f"field {where}: unknown function {v!r}")
            return funcs_tab[v]
        return _decode_function(v, lambda s: get_set(s, where + ".set"))

    def op(node, where):
        kind = node["op"]
        if kind == "identity":
            return Identity()
        if kind == "project":
            return Project(get_set(node["set"], where + ".set"))
        if kind == "prox":
            return Prox(get_func(node["function"], where + ".function"),
                        ProxParams(node["lam"], node.get("p", 2.0)))
        if kind == "km":
            return KM(op(node["inner"], where + ".inner"), node["beta"])
        if kind == "compose":
            return Compose([op(o, f"{where}.ops[{i}]") for i, o in enumerate(node["ops"])])
        return Average([(op(t["operator"], f"{where}.terms[{i}].operator"), t["weight"])
                        for i, t in enumerate(node["terms"])], node.get("p", 2.0))

    T = op(doc["operator"], "operator")
    x0 = space.check(doc["x0"])
    stop = doc.get("stop", {})
    smp = doc.get("sampling", {})
    reg = smp.get("region", {"type": "ball"})
    if reg["type"] == "box":
        region = BoxRegion(np.array(reg["lo"], dtype=float), np.array(reg["hi"], dtype=float))
    else:
        c = reg.get("center")
        region = BallRegion(None if c is None else np.array(c, dtype=float), reg.get("radius"))
    sample = SampleSpec(seed=smp.get("seed", 0), count=smp.get("count", 1000), region=region,
                        exclusion=smp.get("exclusion"))
    fs = doc.get("fixed_set", {"type": "unknown"})
    if fs["type"] == "point":
        fixed = KnownPoint(space.check(fs["point"]))
    elif fs["type"] == "intersection":
        fixed = KnownSet([get_set(s, f"fixed_set.sets[{i}]") for i, s in enumerate(fs.get("sets", []))],
                         [space.check(q) for q in fs.get("points", [])])
    elif fs["type"] == "empty":
        fixed = EmptySet()
    else:
        fixed = Unknown()
    cert = None
    if "certificate" in doc:
        cert = Certificate(alpha=doc["certificate"]["alpha"], eps=doc["certificate"]["eps"],
                           p=space.p, c=space.c, provenance="config override")
    outputs = {"trace": "trace.csv", "report": "report.json"}
    outputs.update(doc.get("outputs", {}))
    return ExperimentConfig(space=space, operator=T, x0=x0, tol=stop.get("tol", 1e-12),
                            max_iter=stop.get("max_iter", 10_000), sample=sample, fixed=fixed,
                            certificate=cert, name=doc.get("name", "custom"),
                            params=doc.get("params", {}), outputs=outputs)


def _decode_set(v):
    if v["type"] == "ball":
        return Ball(np.array(v["center"], dtype=float), v["radius"])
    if v["type"] == "segment":
        return Segment(np.array(v["a"], dtype=float), np.array(v["b"], dtype=float))
    return Halfspace(np.array(v["normal"], dtype=float), v["offset"])


def _decode_function(v, get_set):
    if v["type"] == "indicator":
        return Indicator(get_set(v["set"]))
    pr = v["profile"]
    if pr["type"] == "linear":
        prof = Linear(pr["slope"])
    else:
        prof = Power(pr["exponent"], pr.get("coefficient", 1.0))
    return Radial(np.array(v["anchor"], dtype=float), prof)


# -- encoding -----------------------------------------------------------------------

def _list(a):
    return [float(v) for v in np.asarray(a, dtype=float)]


def encode_set(s) -> dict:
    if isinstance(s, Ball):
        return {"type": "ball", "center": _list(s.center), "radius": float(s.radius)}
    if isinstance(s, Segment):
        return {"type": "segment", "a": _list(s.a), "b": _list(s.b)}
    if isinstance(s, Halfspace):
        return {"type": "halfspace", "normal": _list(s.normal), "offset": float(s.offset)}
    raise ConfigError(f"cannot serialize set {s!r}")


def encode_function(f) -> dict:
    if isinstance(f, Indicator):
        return {"type": "indicator", "set": encode_set(f.set)}
    prof = f.profile
    if isinstance(prof, Linear):
        pd = {"type": "linear", "slope": float(prof.slope)}
    else:
        pd = {"type": "power", "exponent": float(prof.exponent),
              "coefficient": float(prof.coefficient)}
    return {"type": "radial", "anchor": _list(f.anchor), "profile": pd}


def encode_operator(T) -> dict:
    if isinstance(T, Identity):
        return {"op": "identity"}
    if isinstance(T, Project):
        return {"op": "project", "set": encode_set(T.set)}
    if isinstance(T, Prox):
        return {"op": "prox", "function": encode_function(T.f), "lam": float(T.params.lam),
                "p": float(T.params.p)}
    if isinstance(T, KM):
        return {"op": "km", "inner": encode_operator(T.inner), "beta": float(T.beta)}
    if isinstance(T, Compose):
        return {"op": "compose", "ops": [encode_operator(o) for o in T.ops]}
    if isinstance(T, Average):
        return {"op": "average", "p": float(T.p),
                "terms": [{"operator": encode_operator(o), "weight": w} for o, w in T.terms]}
    if isinstance(T, PointMap):
        raise ConfigError("callable point maps cannot be serialized")
    raise ConfigError(f"cannot serialize operator {T!r}")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def to_dict(cfg: ExperimentConfig) -> dict:
    sp = cfg.space.describe()
    s = cfg.sample
    if isinstance(s.region, BoxRegion):
        region = {"type": "box", "lo": _list(s.region.lo), "hi": _list(s.region.hi)}
    else:
        region = {"type": "ball",
                  "center": None if s.region.center is None else _list(s.region.center),
                  "radius": None if s.region.radius is None else float(s.region.radius)}
    fx = cfg.fixed
    if isinstance(fx, KnownPoint):
        fixed = {"type": "point", "point": _list(fx.point)}
    elif isinstance(fx, KnownSet):
        fixed = {"type": "intersection", "sets": [encode_set(c) for c in fx.sets],
                 "points": [_list(q) for q in fx.points]}
    elif isinstance(fx, EmptySet):
        fixed = {"type": "empty"}
    else:
        fixed = {"type": "unknown"}
    doc = {
        "schema": SCHEMA_VERSION, "name": cfg.name, "params": _jsonable(cfg.params),
        "space": _jsonable(sp), "operator": encode_operator(cfg.operator),
        "x0": _list(cfg.x0), "stop": {"tol": float(cfg.tol), "max_iter": int(cfg.max_iter)},
        "sampling": {"seed": int(s.seed), "count": int(s.count), "region": region,
                     "exclusion": None if s.exclusion is None else float(s.exclusion)},
        "fixed_set": fixed, "outputs": dict(cfg.outputs),
    }
    if cfg.certificate is not None:
        doc["certificate"] = {"alpha": cfg.certificate.alpha, "eps": cfg.certificate.eps}
    return doc


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, indent=2)
