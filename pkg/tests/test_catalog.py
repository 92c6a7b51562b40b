import math

import numpy as np
import pytest

from leafspace.catalog import NAMES, oracle_compare, polar, rotate, scenario, to_polar
from leafspace.errors import InvalidParameter, OracleMissing, UnknownScenario
from leafspace.recurrence import philox


def test_polar_round_trip():
    r, th = to_polar(polar(1.5, 0.725))
    assert abs(r - 1.5) < 1e-12 and abs(th - 0.725) < 1e-12


def test_rotate_by_quarter_turn():
    np.testing.assert_allclose(rotate([1.0, 0.0], 0.25)[0], [0.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("name", NAMES)
def test_every_scenario_builds(name):
    sc = scenario(name)
    assert sc.algebra.dim == sc.group.k
    assert sc.domain.sample(philox(0), 5, 1e-3).shape == (5, sc.domain.dimension)


@pytest.mark.parametrize("n", [2, 0, 2.5, True])
def test_rotation_order_must_exceed_two(n):
    with pytest.raises(InvalidParameter):
        scenario("wedge", n)


def test_unknown_names():
    with pytest.raises(UnknownScenario):
        scenario("torus")
    with pytest.raises(InvalidParameter):
        scenario("full_disc", 4, "sphere")
    with pytest.raises(OracleMissing):
        scenario("affine_line").oracle("trajectory")


def test_escape_interval_oracle(wedge4, ray4):
    assert wedge4.oracle("escape_interval")(polar(1.5, 0.5)) == (-1.0, 1.0)
    lo, hi = ray4.oracle("escape_interval")(polar(1.5, 0.4))
    assert lo == pytest.approx(-0.6) and hi == pytest.approx(0.4)


@pytest.mark.parametrize("name", ["full_disc", "wedge", "wedge_plus_ray"])
@pytest.mark.parametrize("op", ["lift", "recurrence", "escape"])
def test_numerics_agree_with_closed_forms(name, op):
    sc = scenario(name, 5)
    pts = sc.domain.sample(philox(11), 6, 1e-2)
    rep = oracle_compare(sc, op, pts, window=3.0)
    assert rep.passed, rep.details


def test_translation_oracles(plane):
    pts = plane.domain.sample(philox(2), 5, 0.1)
    assert oracle_compare(plane, "lift", pts, window=2.0).passed
    assert oracle_compare(plane, "recurrence", pts).passed


def test_unknown_operation(disc4):
    with pytest.raises(InvalidParameter):
        oracle_compare(disc4, "area", [[0.1, 0.1]])


def test_with_group_switches_the_cover(disc4):
    line = disc4.with_group(disc4.group.cover())
    assert line.group.rank == 0 and line.expected["proper"] is False
