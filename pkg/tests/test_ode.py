import math

import numpy as np
from hypothesis import given, strategies as st

from leafspace import ode


def linear_rhs(rows, t, y):
    return -0.5 * y


def test_exponential_decay_matches_closed_form():
    y0 = np.array([[1.0], [2.0], [-3.0]])
    res = ode.integrate(linear_rhs, 0.0, 2.0, y0)
    assert not res.escaped.any()
    np.testing.assert_allclose(res.y, y0 * math.exp(-1.0), rtol=1e-9, atol=1e-12)


def test_harmonic_oscillator_period():
    def rhs(rows, t, y):
        return np.stack([-y[:, 1], y[:, 0]], axis=1)

    res = ode.integrate(rhs, 0.0, 2 * math.pi, np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(res.y[0], [1.0, 0.0], atol=1e-8)


def test_exit_is_located_on_the_clearance_boundary():
    # unit speed to the right, wall at x = 0.7
    def rhs(rows, t, y):
        return np.ones_like(y)

    res = ode.integrate(rhs, 0.0, 1.0, np.array([[0.0]]), clearance=lambda p: 0.7 - p[:, 0],
                        corridor=lambda p, q: 0.7 - np.maximum(p[:, 0], q[:, 0]))
    assert res.escaped[0]
    assert abs(res.t[0] - 0.7) < 1e-8


def test_frozen_rows_do_not_move():
    res = ode.integrate(linear_rhs, 0.0, 1.0, np.array([[1.0], [1.0]]), frozen=np.array([True, False]))
    assert res.y[0, 0] == 1.0
    assert abs(res.y[1, 0] - math.exp(-0.5)) < 1e-9


def test_recorded_trajectory_spans_interval():
    res = ode.integrate(linear_rhs, 0.0, 1.0, np.array([[1.0]]), record=True)
    ts, ys = res.trajectories[0]
    assert ts[0] == 0.0 and abs(ts[-1] - 1.0) < 1e-12
    np.testing.assert_allclose(ys[:, 0], np.exp(-0.5 * ts), rtol=1e-9)


@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_flow_group_law_for_linear_system(a, b):
    y0 = np.array([[1.3]])
    ab = ode.integrate(linear_rhs, 0.0, a + b, y0).y
    step = ode.integrate(linear_rhs, 0.0, b, ode.integrate(linear_rhs, 0.0, a, y0).y).y
    np.testing.assert_allclose(ab, step, rtol=1e-8)
