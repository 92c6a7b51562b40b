import numpy as np
import pytest
from hypothesis import given, strategies as st

from leafspace.errors import JunctionParameter
from leafspace.group import GroupPath, GroupSpec, deck_orbit, flatness_defect, group_distance, mc_velocity, project

CIRCLE = GroupSpec(1, ((1.0,),))
TORUS = GroupSpec(2, ((1.0, 0.0), (0.5, 1.0)))


def test_project_circle():
    assert abs(project(CIRCLE, [1.25])[0] - 0.25) < 1e-15


def test_deck_orbit_window():
    np.testing.assert_allclose(deck_orbit(CIRCLE, [0.25], 2.0)[:, 0], [-1.75, -0.75, 0.25, 1.25])


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_project_is_idempotent_and_in_class(a, b):
    for spec, g in ((CIRCLE, np.array([a])), (TORUS, np.array([a, b]))):
        p = project(spec, g)
        np.testing.assert_allclose(project(spec, p), p, atol=1e-9)
        coords = np.linalg.solve(spec.lattice.T, g - p)
        np.testing.assert_allclose(coords, np.round(coords), atol=1e-8)


@given(st.floats(-3, 3), st.floats(0.5, 4))
def test_deck_orbit_matches_brute_force(g, window):
    brute = [g + m for m in range(-20, 21) if abs(g + m) <= window + 1e-12]
    np.testing.assert_allclose(deck_orbit(CIRCLE, [g], window)[:, 0], brute)


def test_deck_elements_are_lattice_points():
    D = TORUS.deck_elements(2)
    assert len(D) == 25
    coords = np.linalg.solve(TORUS.lattice.T, D.T).T
    np.testing.assert_allclose(coords, np.round(coords), atol=1e-12)
    np.testing.assert_allclose(D[0], [0.0, 0.0])


def test_group_distance_wraps():
    assert abs(group_distance(CIRCLE, [0.05], [0.95]) - 0.1) < 1e-12
    assert group_distance(GroupSpec(1), [0.05], [0.95]) == pytest.approx(0.9)


def test_dependent_lattice_is_rejected():
    with pytest.raises(ValueError):
        GroupSpec(2, ((1.0, 0.0), (2.0, 0.0)))


def test_path_junction_velocity_is_refused():
    p = GroupPath.polyline([[0.0], [1.0], [0.5]], breaks=[0.0, 0.5, 1.0])
    with pytest.raises(JunctionParameter):
        mc_velocity(p, 0.5)
    np.testing.assert_allclose(mc_velocity(p, 0.25), [2.0])


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_concat_and_translate(a, b, c):
    p = GroupPath.linear([a], [b])
    q = GroupPath.linear([b], [c])
    pq = p.concat(q)
    np.testing.assert_allclose(pq.start, [a], atol=1e-12)
    np.testing.assert_allclose(pq.end, [c], atol=1e-12)
    np.testing.assert_allclose(pq.value(0.25), p.value(0.5), atol=1e-12)
    np.testing.assert_allclose(p.translate([1.0]).end, [b + 1.0], atol=1e-12)


def test_flatness_defect(plane, affine):
    from leafspace.action import VectorFieldAlgebra

    def dx(P):
        return np.stack([np.ones(len(P)), np.zeros(len(P))], axis=1)

    def dy(P):
        return np.stack([np.zeros(len(P)), np.ones(len(P))], axis=1)

    alg = VectorFieldAlgebra(plane.domain, [dx, dy], np.zeros((2, 2, 2)))
    assert flatness_defect(alg, GroupSpec(2), [0.3, 0.2]) <= 1e-6
    assert flatness_defect(affine.algebra, affine.group, [0.7]) > 0.1
