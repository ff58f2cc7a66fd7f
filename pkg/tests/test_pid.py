import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdprlab.dynamics import DynamicsParams, integrate, static_equilibrium_tensions
from cdprlab.errors import AllCandidatesDiverged
from cdprlab.geometry import RobotGeometry, jacobian
from cdprlab.pid import (PidController, PidGains, PidState, force_to_tensions, gain_grid,
                         pid_force, search_gains, tune_gains)
from cdprlab.trajectories import TrajectorySpec, track

CENTER = np.array([1.155, 1.405, 1.0])
SHORT_CIRCLE = TrajectorySpec(duration=4.0)


def test_zero_error_is_gravity_feedforward():
    state = PidState()
    for _ in range(5):
        f, state = pid_force(PidGains(10, 1, 1), state, np.zeros(3), 0.1)
        np.testing.assert_array_equal(f, [0, 0, 9.81])


def test_proportional_only():
    f, _ = pid_force(PidGains(10, 0, 0), PidState(), [0.1, 0, 0], 0.1)
    np.testing.assert_allclose(f, [1.0, 0, 9.81], atol=1e-15)


def test_integral_matches_discrete_sum():
    state, gains = PidState(), PidGains(0, 1, 0)
    for _ in range(10):
        f, state = pid_force(gains, state, [0.1, 0, 0], 0.1)
    oracle = sum(0.1 * 0.1 for _ in range(10))
    np.testing.assert_allclose(f - [0, 0, 9.81], [oracle, 0, 0], atol=1e-15)


def test_derivative_on_error():
    gains = PidGains(0, 0, 2)
    f, s = pid_force(gains, PidState(), [0.1, 0, 0], 0.1)
    np.testing.assert_array_equal(f, [0, 0, 9.81])  # no history yet
    f, _ = pid_force(gains, s, [0.3, 0, 0], 0.1)
    np.testing.assert_allclose(f, [2 * 0.2 / 0.1, 0, 9.81], atol=1e-12)


def test_integral_clamped():
    state = PidState()
    for _ in range(100):
        _, state = pid_force(PidGains(0, 1, 0), state, [5.0, -5.0, 0.0], 0.1)
    np.testing.assert_array_equal(state.integral, [1.0, -1.0, 0.0])


def test_bad_dt():
    with pytest.raises(ValueError):
        pid_force(PidGains(1, 1, 1), PidState(), np.zeros(3), 0.0)


def test_negative_gains_rejected():
    with pytest.raises(ValueError):
        PidGains(-1, 0, 0)


def _hist():
    return [np.array([0.1, -0.2, 0.05]), np.array([0.05, 0.0, 0.1]), np.array([-0.3, 0.1, 0.0])]


def _run(gains):
    state, out = PidState(), []
    for e in _hist():
        f, state = pid_force(gains, state, e, 0.1)
        out.append(f - [0, 0, 9.81])
    return np.array(out)


gain = st.floats(0, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(gain, gain, gain, gain, gain, gain)
def test_linear_in_gains(p1, i1, d1, p2, i2, d2):
    a, b = _run(PidGains(p1, i1, d1)), _run(PidGains(p2, i2, d2))
    both = _run(PidGains(p1 + p2, i1 + i2, d1 + d2))
    np.testing.assert_allclose(both, a + b, atol=1e-9)


def test_force_to_tensions_gravity_at_center(geom):
    sol = force_to_tensions(geom, CENTER, [0, 0, 9.81], 20.0)
    np.testing.assert_allclose(sol.tensions, 3.17048772, atol=1e-6)


def test_force_to_tensions_cannot_push(geom):
    sol = force_to_tensions(geom, CENTER, [0, 0, -50], 20.0)
    np.testing.assert_allclose(sol.tensions, 0.0, atol=1e-12)
    assert sol.residual == pytest.approx(50.0)


def test_force_to_tensions_interior_linearity(geom):
    one = force_to_tensions(geom, CENTER, [0, 0, 9.81], 20.0).tensions
    two = force_to_tensions(geom, CENTER, [0, 0, 19.62], 20.0).tensions
    np.testing.assert_allclose(two, 2 * one, atol=1e-6)


def test_feasible_force_realised_exactly(geom):
    r = np.random.default_rng(0)
    p = np.array([1.0, 1.5, 1.2])
    for _ in range(20):
        t = r.uniform(1, 15, 4)
        F = -jacobian(geom, p).T @ t
        sol = force_to_tensions(geom, p, F, 20.0)
        assert np.linalg.norm(-jacobian(geom, p).T @ sol.tensions - F) < 1e-6


def test_zero_error_holds_center(geom, params):
    gains, state = PidGains(15, 0.5, 5), PidState()
    p, v = CENTER.copy(), np.zeros(3)
    for _ in range(100):
        f, state = pid_force(gains, state, np.zeros(3), params.dt)
        t = force_to_tensions(geom, p, f, params.max_tension).tensions
        p, v, _ = integrate(geom, params, p, v, t)
    assert np.linalg.norm(p - CENTER) < 1e-6


def test_tune_returns_best_singleton(geom, params):
    g = PidGains(15, 0.5, 5)
    assert tune_gains(geom, params, SHORT_CIRCLE, [g]) == g


def test_tune_filters_unstable(geom):
    params = DynamicsParams(dt=0.2)
    stable, unstable = PidGains(5, 0, 1), PidGains(400, 0, 0)
    assert track(PidController(unstable), geom, params, SHORT_CIRCLE, 0.2).diverged
    assert tune_gains(geom, params, SHORT_CIRCLE, [unstable, stable]) == stable


def test_all_diverged_raises(geom):
    params = DynamicsParams(dt=0.2)
    with pytest.raises(AllCandidatesDiverged) as info:
        tune_gains(geom, params, SHORT_CIRCLE, [PidGains(400, 0, 0)])
    assert len(info.value.table) == 1


def test_tuned_rms_not_beaten_by_any_grid_member(geom):
    params = DynamicsParams(dt=0.01)
    grid = gain_grid(kp=np.geomspace(5, 40, 3), kd=np.geomspace(1, 15, 3),
                     ki=np.geomspace(0.1, 2, 3))
    spec = TrajectorySpec(duration=5.0)
    best, best_rms, _ = search_gains(geom, params, spec, grid)
    for g in grid:
        res = track(PidController(g), geom, params, spec, 0.01)
        assert res.diverged or best_rms <= res.rms
    assert tune_gains(geom, params, spec, grid) == best


def test_tie_breaks_to_smaller_gains(geom, params):
    # identical candidates apart from Ki on a zero-error path give identical RMS
    spec = TrajectorySpec(radius=0.0, duration=2.0)
    small, large = PidGains(15, 0.0, 5), PidGains(15, 2.0, 5)
    assert tune_gains(geom, params, spec, [large, small]) == small


def test_gains_text():
    assert PidGains(15, 0.5, 5).as_text() == "kp=15 ki=0.5 kd=5"
    assert PidGains([1, 2, 3], 0, 0).as_text() == "kp=1/2/3 ki=0 kd=0"
