"""Clipped-surrogate policy optimisation, shared by Gaussian and categorical heads."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import NonFiniteGradient
from ..neural import backward, clip_grad_norm
from .common import GaeConfig, gae_advantages, standardize


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch_size: int = 64
    entropy_coeff: float = 0.0
    value_coeff: float = 0.5
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.epochs < 1 or self.minibatch_size < 1:
            raise ValueError("epochs and minibatch_size must be >= 1")


class PpoReport(NamedTuple):
    objective: float
    approx_kl: float
    clip_fraction: float
    value_loss: float
    grad_norm: float


def clipped_objective(policy, params, x, raw, logp_old, adv, clip_eps, entropy_coeff=0.0):
    """``mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c_H * mean(entropy)`` and its gradient.

    ``adv`` is used as given (standardise before calling).
    """
    n = len(adv)
    net, head_p = policy.split(params)
    d = policy.dist_normed(x, params)
    logp = policy.head.raw_log_prob(d, raw)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    unclipped_wins = ratio * adv <= clipped * adv
    inside = (ratio >= 1.0 - clip_eps) & (ratio <= 1.0 + clip_eps)
    objective = float(np.mean(np.minimum(ratio * adv, clipped * adv)))
    # d/dlogp of the min: r*A where the unclipped branch is active, else 0
    coeff = np.where(unclipped_wins | inside, ratio * adv, 0.0) / n
    grad = policy.grad_log_prob_weighted(x, raw, coeff, params)
    if entropy_coeff:
        ent = policy.head.entropy(d)
        objective += entropy_coeff * float(np.mean(ent))
        g_out, g_head = policy.head.entropy_grad(d, head_p)
        g_net = backward(policy.spec, net, x, g_out * (entropy_coeff / n))
        grad = grad + np.concatenate([g_net, entropy_coeff * g_head])
    stats = {"clip_fraction": float(np.mean(~inside)),
             "approx_kl": float(np.mean(logp_old - logp))}
    return objective, grad, stats


def ppo_update(policy, value_fn, batch, cfg, lr, policy_opt, value_opt, gae=GaeConfig(),
               rng=None):
    """Several epochs of minibatch ascent on the clipped surrogate.

    The value network is regressed on GAE returns in the same minibatches,
    weighted by ``value_coeff``.  Both gradients are norm-clipped.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = policy.normalizer(batch.obs)
    raw = batch.raw_actions
    adv, returns = gae_advantages(batch, gae)
    adv = standardize(adv)
    logp_old = batch.log_probs
    n = len(adv)
    obj = kl = clip_frac = v_loss = g_norm = 0.0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            obj, g, stats = clipped_objective(policy, policy.params, x[idx], raw[idx],
                                              logp_old[idx], adv[idx], cfg.clip_eps,
                                              cfg.entropy_coeff)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient("PPO policy gradient is not finite")
            g, g_norm = clip_grad_norm(g, cfg.max_grad_norm)
            policy.params = policy_opt.step(policy.params, -g, lr)
            v_loss, vg = value_fn.mse_grad(x[idx], returns[idx])
            vg, _ = clip_grad_norm(cfg.value_coeff * vg, cfg.max_grad_norm)
            value_fn.params = value_opt.step(value_fn.params, vg, lr)
            kl, clip_frac = stats["approx_kl"], stats["clip_fraction"]
    return PpoReport(obj, kl, clip_frac, v_loss, g_norm)
