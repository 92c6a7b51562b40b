import numpy as np
from hypothesis import given, strategies as st

from leafspace.catalog import polar
from leafspace.domains import AnnularWedge, ChartDomain, Disc, Slit
from leafspace.recurrence import philox


def test_wedge_membership(wedge4):
    dom = wedge4.domain
    assert not dom.contains(polar(1.5, 0.0))[0]
    assert dom.contains(polar(0.5, 0.0))[0]
    assert not dom.contains(polar(2.5, 0.3))[0]
    # boundary ray of the closed obstacle is removed
    assert not dom.contains(polar(1.5, 0.25))[0]
    assert dom.contains(polar(1.5, 0.5))[0]


def test_ray_is_removed(ray4):
    assert not ray4.domain.contains(polar(1.5, 0.5))[0]
    assert ray4.domain.contains(polar(0.9, 0.5))[0]


def test_disc_signed_distance():
    dom = ChartDomain(2, Disc(2.0))
    np.testing.assert_allclose(dom.signed_distance(np.array([[0.5, 0.0], [0.0, -1.5]])), [1.5, 0.5])


def test_wedge_distance_is_exact_on_simple_points():
    w = AnnularWedge(1.0, 2.0, 0.0, 0.25)
    # straight above the wedge's upper edge at angle 90 degrees there is nothing closer than the edge ray
    p = np.array([[0.0, 0.5]])
    assert abs(w.signed_distance(p)[0] - 0.5) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_signed_distance_agrees_with_containment(seed):
    from leafspace.catalog import scenario

    dom = scenario("wedge_plus_ray", 5).domain
    pts = philox(seed).uniform(-2.5, 2.5, size=(64, 2))
    sd = dom.signed_distance(pts)
    inside = dom.contains(pts)
    assert np.all((sd > 0) == inside)


@given(st.integers(0, 2**32 - 1))
def test_corridor_is_a_lower_bound(seed):
    from leafspace.catalog import scenario

    dom = scenario("wedge", 4).domain
    rng = philox(seed)
    p = dom.sample(rng, 16, 0.01)
    q = p + rng.normal(scale=0.2, size=p.shape)
    c = dom.corridor(p, q)
    s = np.linspace(0, 1, 201)
    chord = p[:, None, :] + s[None, :, None] * (q - p)[:, None, :]
    for i in range(len(p)):
        clear = dom.signed_distance(chord[i])
        assert c[i] <= max(clear.min(), 0.0) + 1e-9


def test_slit_blocks_crossing_chords():
    sl = Slit((-1.0, 0.0), (-2.0, 0.0), 1e-9)
    p = np.array([[-1.5, 0.1]])
    q = np.array([[-1.5, -0.1]])
    assert sl.crossed(p, q)[0]


def test_sampling_respects_margin(wedge4):
    pts = wedge4.domain.sample(philox(3), 200, 0.05)
    assert pts.shape == (200, 2)
    assert np.all(wedge4.domain.signed_distance(pts) > 0.05)


def test_round_trip_dict(wedge4):
    d = wedge4.domain.to_dict()
    again = ChartDomain.from_dict(d)
    pts = philox(0).uniform(-2, 2, size=(100, 2))
    assert np.array_equal(again.contains(pts), wedge4.domain.contains(pts))
