"""
The reach-to-target environment
===============================

Episodes start near a random target with zero velocity.  Actions are four
normalised cable tensions in [-1, 1] (or integer levels in discrete mode).
The reward pays for getting closer (weight 50) plus a proximity bonus
(weight 5), and an episode ends on reaching within 5 cm of the target.
"""

# %%
import numpy as np

from cdprlab.dynamics import static_equilibrium_tensions
from cdprlab.env import (ActionSpec, CdprEnv, EpisodeConfig, NearTarget, RewardConfig,
                         curriculum_reset_distribution, reward)

env = CdprEnv(episode=EpisodeConfig(start_sampling=NearTarget(0.2), rng_seed=0))
obs = env.reset()
print("position", obs[:3], "velocity", obs[3:6], "target", obs[6:9])
print("start distance", env.prev_distance)

# %%
# Doing nothing lets the mass fall, so the reward turns negative.
for _ in range(3):
    obs, r, terminated, truncated, info = env.step(-np.ones(4))
    print(f"distance {info['distance']:.3f}  reward {r:.2f}")

# %%
# The reward itself is a small formula.
cfg = RewardConfig()
print(reward(cfg, 0.5, 0.4, 4.858))

# %%
# A hand-written controller: a damped spring toward the target plus gravity,
# turned into tensions with the same bounded solver the PID uses.
from cdprlab.pid import force_to_tensions


def expert(obs):
    p, v, target = obs[:3], obs[3:6], obs[6:9]
    force = 4.0 * (target - p) - 4.0 * v + np.array([0, 0, 9.81])
    t = force_to_tensions(env.geom, p, force, env.params.max_tension).tensions
    return t / env.params.max_tension * 2 - 1


env = CdprEnv(episode=EpisodeConfig(start_sampling=NearTarget(0.2), rng_seed=1),
              reward_cfg=RewardConfig(success_bonus=10000.0))
for episode in range(3):
    obs, total, n = env.reset(), 0.0, 0
    while True:
        obs, r, te, tr, info = env.step(expert(obs))
        total += r
        n += 1
        if te or tr:
            break
    print(f"episode {episode}: {n} steps, return {total:.0f}, success {info['success']}")

# %%
# Curriculum stages widen the start distribution.
for stage in range(4):
    print(stage, curriculum_reset_distribution(stage).start_sampling)

# %%
# Discrete mode uses five tension levels per cable.
env = CdprEnv(action_spec=ActionSpec("discrete", 5))
env.reset(seed=3)
print(env.step(np.array([1, 1, 1, 1]))[4]["tensions"])
