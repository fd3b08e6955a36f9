import copy
import json
import math
from pathlib import Path

import numpy as np
import pytest

from geoprox import config as C
from geoprox.functions import Ball
from geoprox.harness import PRESETS, iterate, preset
from geoprox.operators import Compose, KnownSet, Project

DEMO = Path(__file__).resolve().parents[1] / "demos" / "configs"


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    doc = C.to_dict(cfg)
    C.validate(doc)
    back = C.loads(C.dumps(cfg))
    assert C.to_dict(back) == doc
    a = iterate(cfg.space, cfg.operator, cfg.x0, cfg.tol, 50)
    b = iterate(back.space, back.operator, back.x0, back.tol, 50)
    assert np.array_equal(a.iterates, b.iterates)


def test_dumps_is_stable():
    cfg = preset("two_halfspaces", theta=math.pi / 5)
    assert C.dumps(cfg) == C.dumps(C.loads(C.dumps(cfg)))


def test_named_references_resolve():
    cfg = C.load(DEMO / "two_balls.json")
    assert isinstance(cfg.operator, Compose)
    left, right = (op.set for op in cfg.operator.ops)
    assert isinstance(left, Ball) and isinstance(cfg.fixed, KnownSet)
    assert cfg.fixed.sets[0] is left and cfg.fixed.sets[1] is right
    assert isinstance(cfg.operator.ops[0], Project)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(C.ConfigError, match=r"line 2, column \d+"):
        C.loads('{"schema": "geoprox-config/1",\n "space": ,}')


def test_schema_error_reports_field_path():
    doc = json.loads((DEMO / "two_balls.json").read_text())
    bad = copy.deepcopy(doc)
    bad["space"]["dim"] = 0
    with pytest.raises(C.ConfigError, match=r"field space"):
        C.from_dict(bad)
    bad = copy.deepcopy(doc)
    bad["operator"]["ops"][1]["set"] = {"type": "ball", "center": [0, 0], "radius": "big"}
    with pytest.raises(C.ConfigError, match=r"field operator"):
        C.from_dict(bad)
    bad = copy.deepcopy(doc)
    bad["operator"]["ops"][0]["set"] = "middle"
    with pytest.raises(C.ConfigError, match=r"unknown set 'middle'"):
        C.from_dict(bad)
    bad = copy.deepcopy(doc)
    bad["schema"] = "other/2"
    with pytest.raises(C.ConfigError, match=r"field schema"):
        C.from_dict(bad)


def test_geometry_errors_become_config_errors():
    doc = json.loads((DEMO / "sphere_prox_chain.json").read_text())
    doc["x0"] = [0.0, 0.0, 2.0]
    with pytest.raises(C.ConfigError, match="sphere"):
        C.from_dict(doc)


def test_missing_file():
    with pytest.raises(C.ConfigError, match="cannot read"):
        C.load(DEMO / "does_not_exist.json")
