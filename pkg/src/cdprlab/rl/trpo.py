"""Trust-region policy update: natural gradient by conjugate gradient, KL line search."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import NonFiniteGradient
from .common import GaeConfig, gae_advantages, standardize


@dataclass(frozen=True)
class TrpoConfig:
    max_kl: float = 0.01
    cg_iters: int = 10
    cg_damping: float = 0.1
    backtrack_coeff: float = 0.8
    backtrack_iters: int = 10
    value_lr: float = 1e-3
    value_epochs: int = 5
    value_minibatch: int = 64

    def __post_init__(self):
        if not self.max_kl > 0:
            raise ValueError("max_kl must be > 0")
        if self.cg_iters < 1:
            raise ValueError("cg_iters must be >= 1")
        if not 0 < self.backtrack_coeff < 1:
            raise ValueError("backtrack_coeff must lie in (0, 1)")


class TrpoReport(NamedTuple):
    accepted: bool
    surrogate_gain: float
    kl: float
    backtracks: int
    grad_norm: float
    value_loss: float


def conjugate_gradient(matvec, b, iters=10, tol=1e-10):
    """Approximately solve ``A x = b`` for symmetric positive definite ``A``."""
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    rr = r @ r
    for _ in range(iters):
        if rr < tol:
            break
        Ap = matvec(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def surrogate(policy, params, x, raw, logp_old, adv):
    d = policy.dist_normed(x, params)
    ratio = np.exp(policy.head.raw_log_prob(d, raw) - logp_old)
    return float(np.mean(ratio * adv))


def mean_kl(policy, old_dist, params, x):
    return float(np.mean(policy.head.kl(old_dist, policy.dist_normed(x, params))))


def fit_value(value_fn, optimizer, x, returns, lr, epochs, minibatch, rng):
    loss = 0.0
    n = len(returns)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, minibatch):
            idx = order[start:start + minibatch]
            loss, g = value_fn.mse_grad(x[idx], returns[idx])
            value_fn.params = optimizer.step(value_fn.params, g, lr)
    return loss


def trpo_update(policy, value_fn, batch, cfg, value_opt=None, value_lr=None, gae=GaeConfig(),
                rng=None):
    """One trust-region step on ``policy`` from an on-policy ``batch``.

    The step is accepted only if the surrogate improves and the measured mean
    KL(old || new) stays within ``max_kl``; otherwise ``policy.params`` is left
    untouched (same array object).  The value function is then refit on the
    GAE returns when an optimiser is given.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = policy.normalizer(batch.obs)
    raw = batch.raw_actions
    adv, returns = gae_advantages(batch, gae)
    adv = standardize(adv)
    old = policy.params
    old_dist = policy.dist_normed(x, old)
    logp_old = policy.head.raw_log_prob(old_dist, raw)

    g = policy.grad_log_prob_weighted(x, raw, adv / len(adv), old)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("policy gradient is not finite")
    g_norm = float(np.linalg.norm(g))
    accepted, gain, kl, tries = False, 0.0, 0.0, 0

    if g_norm > 0.0:
        def fvp(v):
            return policy.fisher_vector_product(x, v, old) + cfg.cg_damping * v

        step_dir = conjugate_gradient(fvp, g, cfg.cg_iters)
        shs = float(step_dir @ fvp(step_dir))
        if not (np.isfinite(shs) and shs > 0):
            raise NonFiniteGradient("natural gradient step is not finite")
        full_step = np.sqrt(2.0 * cfg.max_kl / shs) * step_dir
        base = surrogate(policy, old, x, raw, logp_old, adv)
        frac = 1.0
        for tries in range(1, cfg.backtrack_iters + 1):
            candidate = old + frac * full_step
            new_surr = surrogate(policy, candidate, x, raw, logp_old, adv)
            kl = mean_kl(policy, old_dist, candidate, x)
            if np.isfinite(new_surr) and new_surr > base and kl <= cfg.max_kl:
                policy.params = candidate
                accepted, gain = True, new_surr - base
                break
            frac *= cfg.backtrack_coeff
        if not accepted:
            kl = 0.0

    value_loss = float("nan")
    if value_opt is not None:
        value_loss = fit_value(value_fn, value_opt, x, returns,
                               cfg.value_lr if value_lr is None else value_lr,
                               cfg.value_epochs, cfg.value_minibatch, rng)
    return TrpoReport(accepted, gain, kl, tries, g_norm, value_loss)
