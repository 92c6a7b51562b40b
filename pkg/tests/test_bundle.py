import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafspace.bundle import (
    LinearLift, homomorphism_defect, lift_path_on_bundle, linearity_defect, projectability_check, tangent_lift,
)
from leafspace.catalog import polar, scenario
from leafspace.errors import NotLiftable, StencilExitsDomain
from leafspace.group import GroupPath
from leafspace.lift import lift_path
from leafspace.recurrence import philox

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation_matrix(turns):
    a = 2 * math.pi * turns
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def test_tangent_lift_of_rotation(disc4):
    L = tangent_lift(disc4.algebra)
    A = L.matrices(0, np.array([polar(1.0, 0.1), polar(0.3, 0.7)]))
    np.testing.assert_allclose(A, np.broadcast_to(2 * math.pi / 4 * J, (2, 2, 2)), atol=1e-8)


def test_tangent_lift_of_dilation(affine):
    L = tangent_lift(affine.algebra)
    np.testing.assert_allclose(L.matrices(1, np.array([[0.4], [-2.0]]))[:, 0, 0], [1.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(L.matrices(0, np.array([[0.4]]))[0, 0, 0], 0.0, atol=1e-12)


def test_tangent_lift_checks_stencils(wedge4):
    with pytest.raises(StencilExitsDomain):
        tangent_lift(wedge4.algebra, h=1e-3, at=[polar(2.0 - 1e-4, 0.5)])


@pytest.mark.parametrize("n", [3, 4, 7])
def test_winding_one_transport_is_rotation(n):
    sc = scenario("full_disc", n)
    L = tangent_lift(sc.algebra)
    v0 = np.array([0.3, -1.2])
    res = lift_path_on_bundle(L, sc.group, GroupPath.linear([0.0], [1.0]), polar(1.0, 0.1), v0)
    np.testing.assert_allclose(res.v[0], rotation_matrix(1 / n) @ v0, atol=1e-6)
    np.testing.assert_allclose(res.y[0], rotation_matrix(1 / n) @ polar(1.0, 0.1), atol=1e-6)


def test_zero_vector_is_transported_to_zero(disc4):
    L = tangent_lift(disc4.algebra)
    res = lift_path_on_bundle(L, disc4.group, GroupPath.linear([0.0], [2.3]), polar(1.0, 0.1), [0.0, 0.0])
    assert np.all(res.v == 0.0)


def test_bundle_lift_escapes_with_the_base(wedge4):
    L = tangent_lift(wedge4.algebra)
    with pytest.raises(NotLiftable) as err:
        lift_path_on_bundle(L, wedge4.group, GroupPath.linear([0.0], [1.5]), polar(1.5, 0.5), [1.0, 0.0])
    assert abs(err.value.escape - 2 / 3) < 1e-6


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_transport_superposition_and_projection(seed, a, b, g):
    sc = scenario("full_disc", 4)
    L = tangent_lift(sc.algebra)
    rng = philox(seed)
    X = sc.domain.sample(rng, 8, 0.1)
    U, W = rng.normal(size=(2, 8, 2))
    P = GroupPath.linear([0.0], [g])
    ru = lift_path_on_bundle(L, sc.group, P, X, U)
    rw = lift_path_on_bundle(L, sc.group, P, X, W)
    rs = lift_path_on_bundle(L, sc.group, P, X, a * U + b * W)
    np.testing.assert_allclose(rs.v, a * ru.v + b * rw.v, atol=1e-7 * (1 + abs(a) + abs(b)))
    for x, y in zip(X, ru.y):
        np.testing.assert_allclose(y, lift_path(sc.algebra, sc.group, P, x, record=False).y_end, atol=1e-8)


def test_projectability_and_linearity(disc4):
    L = tangent_lift(disc4.algebra)
    S = disc4.domain.sample(philox(0), 10, 0.1)
    assert projectability_check(L, S).passed
    assert linearity_defect(L, S) < 1e-10
    assert homomorphism_defect(L, 0, 0, polar(1.0, 0.1), [1.0, 2.0]) < 1e-6


def test_fiber_dependent_base_is_not_projectable(disc4):
    alg = disc4.algebra

    def leaky(P, V):
        return alg.fields[0](P) + 0.1 * V

    L = LinearLift(alg, [lambda P: np.zeros((len(P), 2, 2))], 2, base=[leaky])
    rep = projectability_check(L, disc4.domain.sample(philox(1), 5, 0.1))
    assert not rep.passed and rep.fiber_dependence > 0.05


def test_affine_tangent_lift_respects_brackets(affine):
    L = tangent_lift(affine.algebra)
    assert homomorphism_defect(L, 0, 1, [0.7], [1.3]) < 1e-5
