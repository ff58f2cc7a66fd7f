import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdprlab.dynamics import DynamicsParams
from cdprlab.errors import EmptySequence, TrajectoryLeavesWorkspace
from cdprlab.geometry import RobotGeometry
from cdprlab.neural import DeterministicPolicy, MlpSpec
from cdprlab.pid import PidController, PidGains
from cdprlab.trajectories import (CIRCLE, SPIRAL_RISING, SPIRAL_SHRINKING, InverseDynamicsController,
                                  PolicyController, TrajectorySpec, ZeroController,
                                  default_trajectories, dt_sweep, generate, rms_error,
                                  trajectory_by_name, track)

C = np.array([1.155, 1.405, 1.2])


def test_circle_endpoints():
    spec = TrajectorySpec(CIRCLE)
    times, pos, _ = generate(spec, 0.5)
    np.testing.assert_allclose(pos[0], C + [0.5, 0, 0], atol=1e-15)
    half = np.argmin(np.abs(times - spec.period / 2))
    np.testing.assert_allclose(pos[half], C + [-0.5, 0, 0], atol=1e-12)


def test_rising_spiral_one_period():
    spec = TrajectorySpec(SPIRAL_RISING, z_rate=0.02, duration=20.0)
    _, pos, _ = generate(spec, 0.1)
    np.testing.assert_allclose(pos[-1] - pos[0], [0, 0, 0.02 * 20.0], atol=1e-12)


def test_shrinking_spiral_radius_clamped():
    spec = TrajectorySpec(SPIRAL_SHRINKING, radius=0.1, radius_rate=0.01, duration=20.0)
    _, pos, vel = generate(spec, 0.1)
    np.testing.assert_allclose(pos[-1], C, atol=1e-12)
    np.testing.assert_allclose(vel[-1], 0.0, atol=1e-12)


def test_row_count():
    times, pos, vel = generate(TrajectorySpec(duration=40.0), 0.1)
    assert len(times) == len(pos) == len(vel) == 401


@pytest.mark.parametrize("name", ["circle", "spiral1", "spiral2"])
def test_velocities_match_central_differences(name):
    spec = trajectory_by_name(name)
    dt = 0.01
    times, pos, vel = generate(spec, dt)
    fd = (pos[2:] - pos[:-2]) / (2 * dt)
    mask = np.ones(len(fd), bool)
    if spec.kind == SPIRAL_SHRINKING:
        mask = spec.radius - spec.radius_rate * times[1:-1] > dt  # skip the clamp kink
    assert np.max(np.abs(fd - vel[1:-1])[mask]) < 10 * dt ** 2


def test_leaving_workspace_raises():
    with pytest.raises(TrajectoryLeavesWorkspace):
        generate(TrajectorySpec(radius=2.0), 0.1)


def test_bad_dt():
    with pytest.raises(ValueError):
        generate(TrajectorySpec(), 0.0)
    with pytest.raises(ValueError):
        generate(TrajectorySpec(duration=0.05), 0.1)


def test_unknown_name():
    with pytest.raises(ValueError):
        trajectory_by_name("square")


@pytest.mark.parametrize("name", ["circle", "spiral1", "spiral2"])
@pytest.mark.parametrize("dt", [0.01, 0.1])
def test_inverse_dynamics_oracle_tracks_exactly(geom, name, dt):
    res = track(InverseDynamicsController(), geom, DynamicsParams(), trajectory_by_name(name), dt)
    assert not res.diverged
    assert res.rms < 1e-6


def test_zero_controller_diverges(geom):
    res = track(ZeroController(), geom, DynamicsParams(), TrajectorySpec(), 0.1)
    assert res.diverged
    assert len(res.errors) < 400


def test_tracking_result_shapes(geom):
    res = track(PidController(PidGains(15, 0.5, 5)), geom, DynamicsParams(),
                TrajectorySpec(duration=4.0), 0.1)
    assert res.times.shape == (40,) and res.actual.shape == (40, 3) and res.errors.shape == (40,)
    assert res.rms == pytest.approx(np.sqrt(np.mean(res.errors ** 2)))


def test_rms_examples():
    assert rms_error([0.3, 0.4]) == pytest.approx(np.sqrt(0.125))
    assert rms_error(np.zeros(7)) == 0.0
    assert rms_error(np.full(5, 0.25)) == pytest.approx(0.25)
    with pytest.raises(EmptySequence):
        rms_error([])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=30),
       st.floats(0, 10, allow_nan=False), st.randoms(use_true_random=False))
def test_rms_permutation_and_scaling(errors, k, rnd):
    shuffled = errors[:]
    rnd.shuffle(shuffled)
    assert rms_error(shuffled) == pytest.approx(rms_error(errors), rel=1e-12, abs=1e-300)
    assert rms_error(np.multiply(k, errors)) == pytest.approx(k * rms_error(errors), rel=1e-9,
                                                               abs=1e-300)


def test_sweep_single_dt_one_row_per_controller():
    spec = TrajectorySpec(duration=4.0)
    rows = dt_sweep([PidController(PidGains(15, 0.5, 5)), InverseDynamicsController()], spec, [0.1])
    assert [r.controller for r in rows] == ["oracle", "pid"]
    assert rows[1].gains == "kp=15 ki=0.5 kd=5"


def test_sweep_sorted_and_retunes():
    spec = TrajectorySpec(duration=4.0)
    rows = dt_sweep([PidController()], spec, [0.2, 0.05])
    assert [r.dt for r in rows] == [0.05, 0.2]
    assert all(r.gains for r in rows)


def test_pid_worse_at_large_dt():
    spec = TrajectorySpec(duration=10.0)
    small, large = dt_sweep([PidController()], spec, [0.01, 0.5])
    assert large.diverged or large.rms > small.rms


def test_sweep_deterministic():
    spec = TrajectorySpec(duration=4.0)
    assert dt_sweep([PidController()], spec, [0.1]) == dt_sweep([PidController()], spec, [0.1])


def test_empty_dt_list():
    with pytest.raises(ValueError):
        dt_sweep([ZeroController()], TrajectorySpec(), [])


def test_policy_controller_observation(geom, params):
    seen = []

    class Probe:
        obs_dim = 12

        def deterministic_action(self, obs):
            seen.append(obs)
            return np.zeros(4)

    ctrl = PolicyController(Probe())
    ctrl.reset(geom, params)
    p, v = np.ones(3), np.full(3, 0.1)
    t = ctrl.tensions(p, v, (np.zeros(3), np.zeros(3)), (np.full(3, 2.0), np.full(3, 0.3)))
    np.testing.assert_array_equal(t, 10.0)
    np.testing.assert_array_equal(seen[0], np.concatenate([p, v, np.full(3, 2.0), np.full(3, 0.3)]))


def test_policy_controller_tracks(geom, params, rng):
    spec = MlpSpec(9, 4, (8,))
    policy = DeterministicPolicy(spec, rng.normal(0, 0.1, spec.n_params))
    res = track(PolicyController(policy), geom, params, TrajectorySpec(duration=4.0), 0.1)
    assert len(res.errors) > 0 and np.isfinite(res.rms)


def test_default_trajectories_inside_workspace(geom):
    for spec in default_trajectories().values():
        generate(spec, 0.01, geom)
