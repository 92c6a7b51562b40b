import json

import numpy as np
import pytest

from leafspace.bundle import lift_path_on_bundle
from leafspace.catalog import polar
from leafspace.errors import InvalidConfig
from leafspace.group import GroupPath
from leafspace.scenario_file import load_lift, load_scenario, polynomial

ROTATION = {
    "name": "unit-rotation",
    "domain": {"dimension": 2, "base": {"type": "disc", "radius": 2.0}},
    "fields": [[[{"coeff": -1.0, "powers": [0, 1]}], [{"coeff": 1.0, "powers": [1, 0]}]]],
    "structure_constants": [[[0.0]]],
    "group": {"k": 1, "lattice_generators": [[6.283185307179586]]},
    "vertical": [[[[], [{"coeff": -1.0, "powers": [0, 0]}]], [[{"coeff": 1.0, "powers": [0, 0]}], []]]],
}


def test_polynomial_evaluation():
    p = polynomial([{"coeff": 2.0, "powers": [1, 2]}, {"coeff": -1.0, "powers": [0, 0]}], 2)
    np.testing.assert_allclose(p(np.array([[3.0, 2.0], [1.0, 0.0]])), [23.0, -1.0])


def test_inline_rotation_field(tmp_path):
    f = tmp_path / "rot.json"
    f.write_text(json.dumps(ROTATION))
    sc = load_scenario(str(f))
    np.testing.assert_allclose(sc.algebra.fields[0](np.array([[1.0, 0.0]])), [[0.0, 1.0]])
    assert sc.group.compact
    lift = load_lift(str(f), sc)
    res = lift_path_on_bundle(lift, sc.group, GroupPath.linear([0.0], [np.pi / 2]), [1.0, 0.0], [1.0, 0.0])
    np.testing.assert_allclose(res.y[0], [0.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(res.v[0], [0.0, 1.0], atol=1e-8)


def test_catalog_reference():
    sc = load_scenario({"catalog": {"name": "wedge", "n": 5}})
    assert sc.name == "wedge" and sc.params["n"] == 5


@pytest.mark.parametrize("patch", [
    {"fields": [[[{"coeff": 1.0, "powers": [0, 0]}]]]},
    {"group": {"k": 2}},
    {"fields": [[[{"coeff": 1.0, "powers": [-1, 0]}], []]]},
])
def test_malformed_files_are_rejected(patch):
    with pytest.raises(InvalidConfig):
        load_scenario({**ROTATION, **patch})


def test_unreadable_file(tmp_path):
    with pytest.raises(InvalidConfig):
        load_scenario(str(tmp_path / "missing.json"))
