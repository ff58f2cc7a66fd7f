"""Training loops tying environment, networks and update rules together."""
import dataclasses
import math
from typing import Any, List, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from ..dynamics import static_equilibrium_tensions
from ..env import CdprEnv, curriculum_reset_distribution
from ..errors import ConfigError, NonFiniteGradient
from ..neural import Adam, CategoricalHead, GaussianHead, MlpSpec, Policy, ValueFunction
from .common import EpisodeStats, LrSchedule, ReplayBuffer, Runner, cosine_warmup_lr
from .ddpg import DdpgAgent, ddpg_update
from .ppo import ppo_update
from .trpo import trpo_update

METRIC_FIELDS = ("iteration", "env_steps", "mean_episode_reward", "mean_episode_length",
                 "success_rate", "kl", "lr", "stage", "accepted")


class TrainResult(NamedTuple):
    policy: Any
    metrics: List[dict]
    value_fn: Optional[ValueFunction]
    stage: int


def make_env(cfg, seed, include_target_velocity=None):
    episode = cfg.episode_obj(seed)
    if include_target_velocity is not None:
        episode = dataclasses.replace(episode, include_target_velocity=include_target_velocity)
    return CdprEnv(cfg.geometry_obj(), cfg.dynamics_obj(), episode, cfg.reward_obj(),
                   cfg.action_obj())


def make_head(cfg):
    spec = cfg.action_obj()
    return CategoricalHead(4, spec.levels) if spec.discrete else GaussianHead(4)


def hover_output_bias(cfg, head):
    """Output-layer bias whose mean action holds the mass still at the workspace center.

    Gaussian: the pre-squash mean that maps to the equilibrium tensions.
    Categorical: logits ``beta * level`` with ``beta`` chosen so the expected
    tension equals the equilibrium tension.
    """
    geom, params = cfg.geometry_obj(), cfg.dynamics_obj()
    t_eq = static_equilibrium_tensions(geom, params, geom.workspace_center).tensions
    frac = np.clip(t_eq / params.max_tension, 1e-3, 1 - 1e-3)
    if head.kind == "gaussian":
        return np.arctanh(2.0 * frac - 1.0)
    levels = np.arange(head.levels) / (head.levels - 1)
    out = []
    for f in frac:
        def mean_gap(beta):
            w = np.exp(beta * levels - np.max(beta * levels))
            return w @ levels / w.sum() - f
        beta = brentq(mean_gap, -50.0, 50.0)
        out.append(beta * levels)
    return np.concatenate(out)


def make_policy(cfg, obs_dim, rng):
    head = make_head(cfg)
    spec = MlpSpec(obs_dim, head.net_output_dim, cfg.network.hidden)
    policy = Policy(spec, head, rng=rng)
    if head.n_params:
        policy.params[spec.n_params:] = cfg.network.init_log_std
    if cfg.network.init_action == "hover":
        policy.params[spec.n_params - spec.output_dim:spec.n_params] = hover_output_bias(cfg, head)
    return policy


def _schedule(cfg, total):
    total = max(int(total), 1)
    warmup = min(int(cfg.schedule.warmup_fraction * total), total - 1)
    return LrSchedule(cfg.schedule.lr_max, cfg.schedule.lr_min, warmup, total)


def _episode_metrics(stats, completed):
    episodes = completed if completed else list(stats.recent)
    if not episodes:
        return float("nan"), float("nan"), float("nan")
    rets, lens, succ = zip(*episodes)
    return float(np.mean(rets)), float(np.mean(lens)), float(np.mean(succ))


class _Curriculum:
    def __init__(self, cfg, env):
        self.enabled = cfg.curriculum.enabled
        self.cfg = cfg
        self.env = env
        self.stage = 0
        if self.enabled:
            env.set_episode(curriculum_reset_distribution(0, env.episode, env.geom))

    def observe(self, success_rate):
        c = self.cfg.curriculum
        if (self.enabled and self.stage < c.max_stage and np.isfinite(success_rate)
                and success_rate >= c.promote_success):
            self.stage += 1
            self.env.set_episode(
                curriculum_reset_distribution(self.stage, self.env.episode, self.env.geom))


def train(algo, cfg, budget, seed, init_policy=None, on_iteration=None):
    """Train ``algo`` ('trpo', 'ppo' or 'ddpg') for ``budget`` environment steps.

    Returns the policy and one metrics row per iteration of ``train.batch_steps``
    steps.  ``init_policy`` continues from a pre-trained on-policy network; it
    is widened automatically when the environment observes more inputs (the
    12-dim target-velocity variant).  ``on_iteration(result_so_far)`` is
    called after each iteration (checkpointing).
    """
    if algo not in ("trpo", "ppo", "ddpg"):
        raise ConfigError(f"unknown algorithm {algo!r}", key="train.algo")
    cfg.validate()
    if budget < 0:
        raise ConfigError("budget must be >= 0", key="train.budget")
    rng = np.random.default_rng(seed)
    env = make_env(cfg, seed)
    if algo == "ddpg":
        return _train_ddpg(cfg, env, budget, rng, on_iteration)

    if init_policy is not None:
        policy = init_policy
        if policy.obs_dim < env.obs_dim:
            policy = policy.expand_inputs(env.obs_dim)
        elif policy.obs_dim != env.obs_dim:
            raise ConfigError(f"policy expects {policy.obs_dim} inputs, environment gives "
                              f"{env.obs_dim}", key="episode.include_target_velocity")
        if policy.head.kind != make_head(cfg).kind:
            raise ConfigError("pre-trained policy head does not match action.mode",
                              key="action.mode")
    else:
        policy = make_policy(cfg, env.obs_dim, rng)
    value_fn = ValueFunction(MlpSpec(env.obs_dim, 1, cfg.network.hidden),
                             scale=cfg.network.value_scale, rng=rng)
    metrics = []
    curriculum = _Curriculum(cfg, env)
    if budget == 0:
        return TrainResult(policy, metrics, value_fn, curriculum.stage)

    batch_steps = cfg.train.batch_steps
    n_iters = math.ceil(budget / batch_steps)
    schedule = _schedule(cfg, n_iters)
    value_opt = Adam(value_fn.params.size)
    policy_opt = Adam(policy.n_params)
    runner = Runner(env)
    steps = 0
    for it in range(n_iters):
        n = min(batch_steps, budget - steps)
        batch = runner.collect(policy, n, rng, value_fn)
        steps += n
        lr = cosine_warmup_lr(schedule, it)
        kl, accepted = float("nan"), True
        try:
            if algo == "trpo":
                value_lr = cfg.trpo.value_lr * lr / cfg.schedule.lr_max \
                    if cfg.schedule.lr_max else 0.0
                report = trpo_update(policy, value_fn, batch, cfg.trpo, value_opt, value_lr,
                                     cfg.gae, rng)
                kl, accepted = report.kl, report.accepted
            else:
                report = ppo_update(policy, value_fn, batch, cfg.ppo, lr, policy_opt, value_opt,
                                    cfg.gae, rng)
                kl = report.approx_kl
        except NonFiniteGradient as exc:
            raise NonFiniteGradient(f"iteration {it}: {exc}") from exc
        policy.normalizer.update(batch.obs)
        completed = runner.stats.drain()
        mean_r, mean_len, success = _episode_metrics(runner.stats, completed)
        metrics.append({"iteration": it, "env_steps": steps, "mean_episode_reward": mean_r,
                        "mean_episode_length": mean_len, "success_rate": success,
                        "kl": kl, "lr": lr, "stage": curriculum.stage,
                        "accepted": int(bool(accepted))})
        curriculum.observe(success)
        if on_iteration is not None:
            on_iteration(TrainResult(policy, metrics, value_fn, curriculum.stage))
    return TrainResult(policy, metrics, value_fn, curriculum.stage)


def _train_ddpg(cfg, env, budget, rng, on_iteration):
    dc = cfg.ddpg
    agent = DdpgAgent(env.obs_dim, 4, cfg.network.hidden, rng)
    metrics = []
    curriculum = _Curriculum(cfg, env)
    if budget == 0:
        return TrainResult(agent, metrics, None, curriculum.stage)
    replay = ReplayBuffer(dc.buffer_capacity, env.obs_dim, 4)
    schedule = _schedule(cfg, budget)
    scale = dc.critic_lr / dc.actor_lr
    obs = env.reset()
    ep_ret, ep_len = 0.0, 0
    stats = EpisodeStats()
    batch_steps = cfg.train.batch_steps
    for t in range(budget):
        if t < dc.learning_starts:
            action = rng.uniform(-1.0, 1.0, size=4)
        else:
            action = agent.act(obs, rng, dc.exploration_sigma)
        nxt, r, te, tr, info = env.step(action)
        replay.add(obs, action, r, nxt, te)
        agent.normalizer.update(obs)
        ep_ret += r
        ep_len += 1
        if te or tr:
            stats.finish(ep_ret, ep_len, info["success"])
            ep_ret, ep_len = 0.0, 0
            obs = env.reset()
        else:
            obs = nxt
        lr = cosine_warmup_lr(schedule, t) * dc.actor_lr / cfg.schedule.lr_max
        if t >= dc.learning_starts and len(replay) >= dc.batch_size:
            try:
                ddpg_update(agent, replay, dc, lr, rng, critic_lr=lr * scale)
            except NonFiniteGradient as exc:
                raise NonFiniteGradient(f"step {t}: {exc}") from exc
        if (t + 1) % batch_steps == 0 or t + 1 == budget:
            done = stats.drain()
            mean_r, mean_len, success = _episode_metrics(stats, done)
            metrics.append({"iteration": len(metrics), "env_steps": t + 1,
                            "mean_episode_reward": mean_r, "mean_episode_length": mean_len,
                            "success_rate": success, "kl": float("nan"), "lr": lr,
                            "stage": curriculum.stage, "accepted": 1})
            curriculum.observe(success)
            if on_iteration is not None:
                on_iteration(TrainResult(agent, metrics, None, curriculum.stage))
    return TrainResult(agent, metrics, None, curriculum.stage)


def evaluate(policy, cfg, episodes=100, seed=0, stage=None, deterministic=True):
    """Mean reward, mean length and success rate of ``policy`` on fresh reach episodes.

    ``stage`` selects the curriculum start distribution (``None``: the
    configured sampling).  Deterministic by default, so the same policy, config
    and seed always give the same numbers.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = make_env(cfg, seed, include_target_velocity=policy.obs_dim == 12)
    if stage is not None and cfg.curriculum.enabled:
        env.set_episode(curriculum_reset_distribution(stage, env.episode, env.geom))
    rng = np.random.default_rng(seed)
    rets, lens, succ = [], [], []
    for _ in range(episodes):
        obs = env.reset()
        total, n = 0.0, 0
        while True:
            if deterministic or not hasattr(policy, "act"):
                action = policy.deterministic_action(obs)
            else:
                action = policy.act(obs, rng)[1]
            obs, r, te, tr, info = env.step(action)
            total += r
            n += 1
            if te or tr:
                break
        rets.append(total)
        lens.append(n)
        succ.append(info["success"])
    return {"mean_reward": float(np.mean(rets)), "mean_length": float(np.mean(lens)),
            "success_rate": float(np.mean(succ))}


class RandomPolicy:
    """Uniform random actions: the baseline every learner has to beat."""

    def __init__(self, cfg, obs_dim=9, rng=None):
        self.spec = cfg.action_obj()
        self.obs_dim = obs_dim
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def deterministic_action(self, obs):
        if self.spec.discrete:
            return self.rng.integers(0, self.spec.levels, size=4)
        return self.rng.uniform(-1.0, 1.0, size=4)


def random_baseline(cfg, episodes=100, seed=0, stage=0):
    """Reach statistics of :class:`RandomPolicy` on the curriculum stage ``stage``."""
    policy = RandomPolicy(cfg, rng=np.random.default_rng(seed + 1))
    return evaluate(policy, cfg, episodes, seed, stage)
