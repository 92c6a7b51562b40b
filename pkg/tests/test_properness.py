import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafspace.catalog import polar, scenario
from leafspace.completion import generate_families
from leafspace.errors import BallExitsDomain, OrbitEscapesDomain, ZeroOrbitDirection
from leafspace.properness import (
    MetricField, accumulates, average_metric, averaged_metric, build_slice, isotropy_compactness, killing_defect,
    proper_check, recapture_families,
)
from leafspace.group import GroupSpec
from leafspace.recurrence import philox


def test_isotropy_over_the_line_at_the_fixed_point_is_not_compact(disc4_line):
    rep = isotropy_compactness(disc4_line.algebra, disc4_line.group, [0.0, 0.0])
    assert not rep.compact
    assert rep.clusters[0][0] <= -rep.B + rep.step and rep.clusters[-1][1] >= rep.B - rep.step


def test_isotropy_over_the_line_elsewhere_is_the_period_lattice(disc4_line):
    rep = isotropy_compactness(disc4_line.algebra, disc4_line.group, polar(1.0, 0.1))
    centers = [0.5 * (a + b) for a, b in rep.clusters]
    np.testing.assert_allclose(centers, [-8.0, -4.0, 0.0, 4.0, 8.0], atol=1e-3)


def test_isotropy_over_the_circle_is_compact(disc4):
    rep = isotropy_compactness(disc4.algebra, disc4.group, [0.0, 0.0])
    assert rep.compact and rep.count == 1
    rep = isotropy_compactness(disc4.algebra, disc4.group, polar(1.0, 0.1))
    assert rep.compact and rep.count == 1


def test_accumulation_rule():
    line = GroupSpec(1)
    assert accumulates(line, np.array([[0.5], [0.5 + 1e-5]]), 10.0)
    assert not accumulates(line, np.array([[0.5], [1.5]]), 10.0)
    # members on the window edge do not count
    assert not accumulates(line, np.array([[10.0], [10.0 - 1e-5]]), 10.0)
    circle = GroupSpec(1, ((1.0,),))
    assert accumulates(circle, np.array([[0.25], [3.25 + 1e-5]]), 10.0)


def test_translation_is_proper(plane):
    fams = generate_families(plane.algebra, plane.group, plane.loci)
    fams += recapture_families(plane.algebra, plane.group, plane.domain.sample(philox(0), 5, 0.5))
    assert proper_check(plane.algebra, plane.group, fams).proper


def test_rotation_over_the_line_is_not_proper(disc4_line):
    fams = recapture_families(disc4_line.algebra, disc4_line.group, [[0.0, 0.0]])
    rep = proper_check(disc4_line.algebra, disc4_line.group, fams)
    assert not rep.proper
    assert rep.counterexample is not None


def test_wedge_is_proper(wedge4):
    fams = generate_families(wedge4.algebra, wedge4.group, wedge4.loci)
    fams += recapture_families(wedge4.algebra, wedge4.group, wedge4.domain.sample(philox(1), 5, 0.05))
    assert proper_check(wedge4.algebra, wedge4.group, fams).proper


def test_slice_at_a_regular_point(wedge4):
    s = build_slice(wedge4.algebra, polar(1.5, 0.5), 0.1)
    assert s.passed
    # the slice is radial: orthogonal to the rotation direction
    radial = polar(1.0, 0.5)
    assert abs(abs(float(s.basis[:, 0] @ radial)) - 1.0) < 1e-9


def test_slice_degenerates_at_the_fixed_point(wedge4):
    assert build_slice(wedge4.algebra, [0.0, 0.0], 0.1).degenerate
    with pytest.raises(ZeroOrbitDirection):
        build_slice(wedge4.algebra, [0.0, 0.0], 0.1, strict=True)


def test_slice_ball_must_fit(wedge4):
    with pytest.raises(BallExitsDomain):
        build_slice(wedge4.algebra, polar(1.95, 0.5), 0.1)


@settings(max_examples=10)
@given(st.floats(0.05, 1.5), st.floats(0.0, 1.0))
def test_slice_is_full_rank_away_from_the_fixed_point(r, th):
    sc = scenario("full_disc", 4)
    radius = r / 1.1
    x = polar(r, th)
    s = build_slice(sc.algebra, x, min(radius, 0.9 * (2.0 - r)))
    assert s.passed and s.residuals["rank"] == 1


def test_flat_metric_is_killing_for_rotations(disc4):
    assert killing_defect(disc4.algebra, MetricField.flat(2), [polar(1.0, 0.1), polar(0.3, 0.6)]) < 1e-8


def test_anisotropic_metric_is_not_killing(disc4):
    assert killing_defect(disc4.algebra, MetricField.constant(np.diag([1.0, 2.0])), [polar(1.0, 0.1)]) > 0.1


def brute_force_average(M, samples=20000):
    # rotations act on the disc linearly, so the pullback is R^T M R with R a rotation by 2 pi s
    s = (np.arange(samples) + 0.5) / samples
    c, d = np.cos(2 * math.pi * s), np.sin(2 * math.pi * s)
    R = np.stack([np.stack([c, -d], axis=1), np.stack([d, c], axis=1)], axis=1)
    return np.einsum("nki,kl,nlj->ij", R, M, R) / samples


def test_average_of_anisotropic_metric(disc4):
    M = np.diag([1.0, 2.0])
    A = average_metric(disc4.algebra, disc4.group, MetricField.constant(M), polar(1.0, 0.1))
    np.testing.assert_allclose(A, brute_force_average(M), atol=1e-4)
    np.testing.assert_allclose(A, 1.5 * np.eye(2), atol=1e-4)


def test_average_needs_a_complete_orbit(wedge4):
    with pytest.raises(OrbitEscapesDomain):
        average_metric(wedge4.algebra, wedge4.group, MetricField.flat(2), polar(1.5, 0.5))


@settings(max_examples=5)
@given(st.floats(0.2, 1.7), st.floats(0.0, 1.0))
def test_averaged_metric_is_killing(r, th):
    sc = scenario("full_disc", 4)
    avg = averaged_metric(sc.algebra, sc.group, MetricField.constant([[2.0, 0.3], [0.3, 1.0]]), quadrature=64)
    assert killing_defect(sc.algebra, avg, [polar(r, th)], h=1e-3) <= 1e-5


def test_metric_must_be_positive_definite():
    from leafspace.errors import InvalidParameter

    with pytest.raises(InvalidParameter):
        MetricField.constant(np.diag([1.0, -1.0]))(np.zeros((1, 2)))


def test_invariant_metric_is_a_fixed_point_of_averaging(disc4):
    A = average_metric(disc4.algebra, disc4.group, MetricField.flat(2), polar(1.0, 0.3))
    np.testing.assert_allclose(A, np.eye(2), atol=1e-6)


def test_zero_field_averaging_is_the_identity(disc4):
    from leafspace.action import VectorFieldAlgebra

    alg = VectorFieldAlgebra(disc4.domain, [lambda P: np.zeros_like(P)], np.zeros((1, 1, 1)))
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    A = average_metric(alg, disc4.group, MetricField.constant(M), polar(0.7, 0.2))
    np.testing.assert_allclose(A, M, atol=1e-12)
