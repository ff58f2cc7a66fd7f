import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdprlab.dynamics import DynamicsParams, integrate, static_equilibrium_tensions
from cdprlab.env import (ActionSpec, CdprEnv, EpisodeConfig, NearTarget, RewardConfig,
                         action_to_tensions, curriculum_reset_distribution, reward)
from cdprlab.errors import ActionOutOfBounds, StepBeforeReset
from cdprlab.geometry import RobotGeometry, workspace_contains


def reward_oracle(d_prev, d_curr, w_improve=50.0, w_prox=5.0, norm=4.858):
    return w_improve * (d_prev - d_curr) + w_prox * (1.0 - min(d_curr / norm, 1.0))


def test_same_seed_same_reset():
    a = CdprEnv(episode=EpisodeConfig(rng_seed=3)).reset()
    b = CdprEnv(episode=EpisodeConfig(rng_seed=3)).reset()
    np.testing.assert_array_equal(a, b)
    c = CdprEnv(episode=EpisodeConfig(rng_seed=4)).reset()
    assert not np.array_equal(a, c)


def test_reset_state():
    env = CdprEnv(episode=EpisodeConfig(rng_seed=1))
    obs = env.reset()
    assert obs.shape == (9,)
    np.testing.assert_array_equal(obs[3:6], 0.0)
    assert env.steps == 0
    assert env.prev_distance == pytest.approx(np.linalg.norm(obs[:3] - obs[6:9]))
    assert workspace_contains(env.geom, obs[:3]) and workspace_contains(env.geom, obs[6:9])


def test_near_target_starts_within_radius():
    env = CdprEnv(episode=EpisodeConfig(start_sampling=NearTarget(0.2), rng_seed=2))
    for _ in range(500):
        obs = env.reset()
        d = np.linalg.norm(obs[:3] - obs[6:9])
        assert env.episode.success_radius < d <= 0.2


def test_uniform_start_mean_near_box_center():
    env = CdprEnv(episode=EpisodeConfig(rng_seed=11))
    starts = np.array([env.reset()[:3] for _ in range(10000)])
    geom = RobotGeometry()
    box_center = (geom.workspace_min + geom.workspace_max) / 2
    assert np.all(np.abs(starts.mean(axis=0) - box_center) <= 0.05)


def test_action_to_tensions_examples():
    cont, disc = ActionSpec(), ActionSpec("discrete", 5)
    np.testing.assert_array_equal(action_to_tensions(cont, -np.ones(4), 20.0), 0.0)
    np.testing.assert_array_equal(action_to_tensions(cont, np.zeros(4), 20.0), 10.0)
    np.testing.assert_array_equal(action_to_tensions(disc, [4, 0, 2, 1], 20.0), [20, 0, 10, 5])


@pytest.mark.parametrize("spec,action", [
    (ActionSpec(), [1.5, 0, 0, 0]),
    (ActionSpec(), [0, 0, 0]),
    (ActionSpec(), [np.nan, 0, 0, 0]),
    (ActionSpec("discrete"), [5, 0, 0, 0]),
    (ActionSpec("discrete"), [-1, 0, 0, 0]),
    (ActionSpec("discrete"), [0.5, 0, 0, 0]),
])
def test_action_bounds(spec, action):
    with pytest.raises(ActionOutOfBounds):
        action_to_tensions(spec, action, 20.0)


def test_reward_examples():
    cfg = RewardConfig()
    assert reward(cfg, 4.858, 4.858, 4.858) == pytest.approx(0.0, abs=1e-12)
    assert reward(cfg, 0.5, 0.4, 4.858) == pytest.approx(9.588, abs=1e-3)
    assert reward(cfg, 0.5, 0.4, 4.858) == pytest.approx(reward_oracle(0.5, 0.4), abs=1e-12)
    assert reward(cfg, 0.7, 0.0, 4.858) == pytest.approx(50 * 0.7 + 5)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5))
def test_reward_monotone_in_d_curr(d_prev, d1, d2):
    lo, hi = sorted((d1, d2))
    cfg = RewardConfig()
    assert reward(cfg, d_prev, lo, 4.858) >= reward(cfg, d_prev, hi, 4.858)


def test_step_before_reset():
    with pytest.raises(StepBeforeReset):
        CdprEnv().step(np.zeros(4))


def test_start_at_target_terminates_immediately():
    env = CdprEnv()
    p = np.array([1.0, 1.0, 1.0])
    env.place(p, p)
    _, _, terminated, truncated, info = env.step(-np.ones(4))
    assert terminated and not truncated and info["success"]


def test_free_fall_rewards_turn_negative():
    env = CdprEnv(reward_cfg=RewardConfig(w_prox=0.0))
    p = np.array([1.155, 1.405, 2.4])
    env.place(p, p + [0, 0, 0.08])
    rewards = []
    for _ in range(4):
        _, r, te, _, _ = env.step(-np.ones(4))
        rewards.append(r)
    assert all(r < 0 for r in rewards)
    assert rewards[1] < rewards[0]


def test_two_step_replay_matches_reward_oracle(geom, params):
    env = CdprEnv()
    start, target = np.array([1.0, 1.2, 1.5]), np.array([1.3, 1.3, 1.6])
    env.place(start, target)
    tensions = [np.array([2.0, 6.0, 7.0, 3.0]), np.array([4.0, 4.0, 4.0, 4.0])]
    total = 0.0
    for t in tensions:
        _, r, _, _, _ = env.step(t / 10.0 - 1.0)
        total += r
    # replay the states by hand and recompute
    p, v = start.copy(), np.zeros(3)
    d_prev, expected = np.linalg.norm(start - target), 0.0
    for t in tensions:
        p, v, _ = integrate(geom, params, p, v, t)
        d = np.linalg.norm(p - target)
        expected += reward_oracle(d_prev, d, norm=geom.frame_diagonal)
        d_prev = d
    assert total == pytest.approx(expected, abs=1e-12)


def test_truncation_at_max_steps(geom, params):
    env = CdprEnv(episode=EpisodeConfig(max_steps=3))
    p = geom.workspace_center
    t_eq = static_equilibrium_tensions(geom, params, p).tensions
    env.place(p, p + [0.5, 0, 0])
    flags = [env.step(t_eq / 10.0 - 1.0)[2:4] for _ in range(3)]
    assert flags == [(False, False), (False, False), (False, True)]


def test_episode_determinism():
    def run():
        env = CdprEnv(episode=EpisodeConfig(rng_seed=5))
        r = np.random.default_rng(0)
        out = [env.reset()]
        for _ in range(50):
            obs, rew, te, tr, _ = env.step(r.uniform(-1, 1, 4))
            out.append(np.append(obs, rew))
            if te or tr:
                out.append(env.reset())
        return np.concatenate(out)
    np.testing.assert_array_equal(run(), run())


def test_telescoping_improvement():
    env = CdprEnv(episode=EpisodeConfig(rng_seed=9, max_steps=40))
    r = np.random.default_rng(1)
    for _ in range(20):
        env.reset()
        d_first, improvement = env.prev_distance, 0.0
        while True:
            _, _, te, tr, info = env.step(r.uniform(-1, 1, 4))
            improvement += 50.0 * (info["d_prev"] - info["distance"])
            if te or tr:
                break
        assert improvement == pytest.approx(50.0 * (d_first - info["distance"]), abs=1e-9)


def test_curriculum_radii(geom):
    assert curriculum_reset_distribution(0).start_sampling == NearTarget(0.2)
    assert curriculum_reset_distribution(1).start_sampling.radius == pytest.approx(0.4)
    assert curriculum_reset_distribution(10 ** 6).start_sampling.radius == geom.workspace_diagonal
    with pytest.raises(ValueError):
        curriculum_reset_distribution(-1)


def test_curriculum_keeps_other_fields():
    base = EpisodeConfig(max_steps=7, rng_seed=4, include_target_velocity=True)
    out = curriculum_reset_distribution(2, base)
    assert (out.max_steps, out.rng_seed, out.include_target_velocity) == (7, 4, True)


def test_target_velocity_observation():
    env = CdprEnv(episode=EpisodeConfig(include_target_velocity=True, rng_seed=1))
    obs = env.reset()
    assert obs.shape == (12,)
    np.testing.assert_array_equal(obs[9:], 0.0)
    assert env.step(np.zeros(4))[0].shape == (12,)


@pytest.mark.parametrize("kwargs", [{"max_steps": 0}, {"success_radius": 0},
                                    {"start_sampling": NearTarget(0.01)},
                                    {"start_sampling": "everywhere"}])
def test_episode_config_validation(kwargs):
    with pytest.raises(ValueError):
        EpisodeConfig(**kwargs)


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(w_improve=-1)
    with pytest.raises(ValueError):
        RewardConfig(norm_distance=0)


def test_success_bonus_paid_once():
    env = CdprEnv(reward_cfg=RewardConfig(success_bonus=100.0))
    p = np.array([1.0, 1.0, 1.0])
    env.place(p, p)
    _, r, te, _, info = env.step(np.zeros(4))
    assert te
    assert r == pytest.approx(reward_oracle(0.0, info["distance"], norm=env.norm_distance) + 100.0, abs=1e-9)
