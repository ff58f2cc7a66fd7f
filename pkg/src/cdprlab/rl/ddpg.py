"""Deterministic actor-critic with replay and soft-updated target networks."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import InsufficientReplay, NonFiniteGradient
from ..neural import (Adam, DeterministicPolicy, MlpSpec, RunningNorm, backward, forward,
                      init_params)


@dataclass(frozen=True)
class DdpgConfig:
    buffer_capacity: int = 100_000
    batch_size: int = 128
    tau: float = 0.005
    exploration_sigma: float = 0.1
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.99
    learning_starts: int = 1000
    reward_scale: float = 1e-3

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must be >= batch_size")


class DdpgReport(NamedTuple):
    critic_loss: float
    actor_objective: float


class DdpgAgent:
    """Actor ``a = tanh(mlp(s))`` and critic ``Q(s, a)`` with target copies."""

    def __init__(self, obs_dim, act_dim=4, hidden=(64, 64), rng=None, normalizer=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.actor_spec = MlpSpec(obs_dim, act_dim, hidden)
        self.critic_spec = MlpSpec(obs_dim + act_dim, 1, hidden)
        self.actor = init_params(self.actor_spec, rng, output_scale=0.01)
        self.critic = init_params(self.critic_spec, rng, output_scale=1.0)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.size)
        self.critic_opt = Adam(self.critic.size)
        self.normalizer = normalizer or RunningNorm(obs_dim)
        self.act_dim = act_dim

    @property
    def obs_dim(self):
        return self.actor_spec.input_dim

    def policy_normed(self, x, params=None):
        return np.tanh(forward(self.actor_spec, self.actor if params is None else params, x))

    def q_normed(self, x, a, params=None):
        p = self.critic if params is None else params
        return forward(self.critic_spec, p, np.concatenate([x, a], axis=-1))[..., 0]

    def act(self, obs, rng=None, sigma=0.0):
        a = self.policy_normed(self.normalizer(obs))
        if sigma > 0:
            a = np.clip(a + sigma * rng.normal(size=a.shape), -1.0, 1.0)
        return a

    def deterministic_action(self, obs):
        return self.act(obs)

    def actor_policy(self):
        """Frozen copy of the current actor for evaluation and saving."""
        norm = self.normalizer.copy()
        norm.frozen = True
        return DeterministicPolicy(self.actor_spec, self.actor.copy(), norm)


def soft_update(target, online, tau):
    return tau * online + (1.0 - tau) * target


def ddpg_update(agent, replay, cfg, lr, rng, critic_lr=None):
    """One critic and one actor gradient step from a replay minibatch.

    Critic target: ``r + gamma (1 - done) Q'(s', mu'(s'))``.  ``lr`` scales the
    actor step (``critic_lr`` the critic, defaulting to ``lr``).
    """
    if len(replay) < cfg.batch_size:
        raise InsufficientReplay(f"replay holds {len(replay)} < {cfg.batch_size} transitions")
    critic_lr = lr if critic_lr is None else critic_lr
    obs, act, rew, nxt, done = replay.sample(rng, cfg.batch_size)
    x, xn = agent.normalizer(obs), agent.normalizer(nxt)
    n = cfg.batch_size

    a_next = agent.policy_normed(xn, agent.actor_target)
    y = rew * cfg.reward_scale + cfg.gamma * (1.0 - done) * agent.q_normed(xn, a_next, agent.critic_target)
    q = agent.q_normed(x, act)
    err = q - y
    critic_loss = float(np.mean(err * err))
    g_critic = backward(agent.critic_spec, agent.critic, np.concatenate([x, act], axis=1),
                        (2.0 * err / n)[:, None])

    pre = forward(agent.actor_spec, agent.actor, x)
    a_pi = np.tanh(pre)
    q_pi = agent.q_normed(x, a_pi)
    _, dq_dinput = backward(agent.critic_spec, agent.critic, np.concatenate([x, a_pi], axis=1),
                            np.full((n, 1), 1.0 / n), return_input_grad=True)
    dq_da = dq_dinput[:, agent.obs_dim:]
    g_actor = backward(agent.actor_spec, agent.actor, x, dq_da * (1.0 - a_pi ** 2))
    if not (np.all(np.isfinite(g_critic)) and np.all(np.isfinite(g_actor))):
        raise NonFiniteGradient("DDPG gradient is not finite")

    agent.critic = agent.critic_opt.step(agent.critic, g_critic, critic_lr)
    agent.actor = agent.actor_opt.step(agent.actor, -g_actor, lr)
    agent.critic_target = soft_update(agent.critic_target, agent.critic, cfg.tau)
    agent.actor_target = soft_update(agent.actor_target, agent.actor, cfg.tau)
    return DdpgReport(critic_loss, float(np.mean(q_pi)))
