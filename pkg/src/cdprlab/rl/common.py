"""Pieces shared by the policy-optimisation algorithms."""
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import EmptyBatch


@dataclass(frozen=True)
class LrSchedule:
    lr_max: float
    lr_min: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if not 0 <= self.lr_min <= self.lr_max:
            raise ValueError("need 0 <= lr_min <= lr_max")
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 0 <= warmup_steps < total_steps")


def cosine_warmup_lr(s, t):
    """Linear warmup to ``lr_max`` then cosine decay to ``lr_min`` at ``total_steps``."""
    if not 0 <= t <= s.total_steps:
        raise ValueError(f"t={t} outside [0, {s.total_steps}]")
    if t < s.warmup_steps:
        return s.lr_max * t / s.warmup_steps
    frac = (t - s.warmup_steps) / (s.total_steps - s.warmup_steps)
    return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + math.cos(math.pi * frac))


@dataclass(frozen=True)
class GaeConfig:
    gamma: float = 0.99
    lam: float = 0.95

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ValueError("need gamma in (0, 1] and lam in [0, 1]")


class RolloutBatch(NamedTuple):
    """One on-policy collection phase; all arrays share the leading length.

    ``next_values`` holds V of the true successor state (zero after a
    terminal step), so truncated episodes bootstrap correctly even when the
    next row belongs to a new episode.  ``obs`` are raw (unnormalised).
    """
    obs: np.ndarray
    raw_actions: np.ndarray
    rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    log_probs: np.ndarray

    @property
    def n_steps(self):
        return len(self.rewards)

    @property
    def boundaries(self):
        """Rows after which the GAE recursion is cut: episode ends and the batch tail."""
        b = self.terminated | self.truncated
        b = b.copy()
        if len(b):
            b[-1] = True
        return b


def gae_advantages(batch, cfg=GaeConfig()):
    """Generalised advantage estimates and value targets ``(advantages, returns)``.

    ``delta_t = r_t + gamma (1 - term_t) V(s_{t+1}) - V(s_t)`` and
    ``A_t = delta_t + gamma lam (1 - end_t) A_{t+1}``.  Advantages are
    returned raw; callers standardise them.
    """
    n = len(batch.rewards)
    if n == 0:
        raise EmptyBatch("no transitions to estimate advantages from")
    not_term = 1.0 - batch.terminated.astype(float)
    deltas = batch.rewards + cfg.gamma * not_term * batch.next_values - batch.values
    cont = 1.0 - batch.boundaries.astype(float)
    adv = np.empty(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = deltas[t] + cfg.gamma * cfg.lam * cont[t] * acc
        adv[t] = acc
    return adv, adv + batch.values


def standardize(x):
    return (x - x.mean()) / (x.std() + 1e-8)


class EpisodeStats:
    """Bookkeeping of completed episodes across collection phases."""

    def __init__(self, window=20):
        self.recent = deque(maxlen=window)
        self.completed = []

    def finish(self, ret, length, success):
        item = (float(ret), int(length), bool(success))
        self.recent.append(item)
        self.completed.append(item)

    def drain(self):
        done, self.completed = self.completed, []
        return done


class Runner:
    """Steps one environment across successive collection phases."""

    def __init__(self, env, seed=None):
        self.env = env
        self.obs = env.reset(seed)
        self.ep_return = 0.0
        self.ep_len = 0
        self.stats = EpisodeStats()

    def collect(self, policy, n_steps, rng, value_fn=None, deterministic=False):
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        norm = policy.normalizer
        obs_dim = self.env.obs_dim
        head = policy.head
        raw_shape = (4,)
        raw_dtype = int if head.kind == "categorical" else float
        obs = np.empty((n_steps, obs_dim))
        raws = np.empty((n_steps,) + raw_shape, dtype=raw_dtype)
        rewards = np.empty(n_steps)
        term = np.zeros(n_steps, dtype=bool)
        trunc = np.zeros(n_steps, dtype=bool)
        logps = np.empty(n_steps)
        final_obs = {}
        for t in range(n_steps):
            obs[t] = self.obs
            raw, action, logp = policy.act(self.obs, rng, deterministic)
            nxt, r, te, tr, info = self.env.step(action)
            raws[t], rewards[t], term[t], trunc[t], logps[t] = raw, r, te, tr, logp
            self.ep_return += r
            self.ep_len += 1
            if te or tr:
                final_obs[t] = nxt
                self.stats.finish(self.ep_return, self.ep_len, info["success"])
                self.ep_return, self.ep_len = 0.0, 0
                self.obs = self.env.reset()
            else:
                self.obs = nxt
        if value_fn is not None:
            values = value_fn(norm(obs))
            succ = np.vstack([obs[1:], self.obs[None, :]])
            for t, o in final_obs.items():
                succ[t] = o
            next_values = value_fn(norm(succ))
            next_values[term] = 0.0
        else:
            values = np.zeros(n_steps)
            next_values = np.zeros(n_steps)
        return RolloutBatch(obs, raws, rewards, term, trunc, values, next_values, logps)


def collect_rollouts(env_factory, policy, n_steps, rng, value_fn=None, seed=None):
    """Fresh environment from ``env_factory``; collect ``n_steps`` transitions."""
    runner = Runner(env_factory(), seed)
    return runner.collect(policy, n_steps, rng, value_fn)


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions."""

    def __init__(self, capacity, obs_dim, act_dim):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, obs, action, reward, next_obs, done):
        i = self._next
        self.obs[i], self.actions[i], self.rewards[i] = obs, action, reward
        self.next_obs[i], self.dones[i] = next_obs, float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def ordered(self):
        """Stored transitions, oldest first, as a tuple of arrays."""
        if self._size < self.capacity:
            idx = np.arange(self._size)
        else:
            idx = (np.arange(self.capacity) + self._next) % self.capacity
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])

    def sample(self, rng, n):
        idx = rng.integers(0, self._size, size=n)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])
