"""Small numpy MLP with exact gradients and policy heads.

Parameters live in one flat float64 vector.  For each layer, in order, the
weight matrix of shape ``(fan_in, fan_out)`` is stored row-major, followed by
the bias of length ``fan_out``.  Hidden layers use tanh; the output layer is
affine.
"""
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from .errors import ActionOutOfSupport, DimensionMismatch

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden: Tuple[int, ...] = (64, 64)
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"all layer sizes must be >= 1: {self}")
        if self.activation != "tanh":
            raise ValueError("only tanh hidden activations are supported")

    @property
    def sizes(self):
        return (self.input_dim,) + self.hidden + (self.output_dim,)

    @property
    def layer_shapes(self):
        s = self.sizes
        return list(zip(s[:-1], s[1:]))

    @property
    def n_params(self):
        return sum(i * o + o for i, o in self.layer_shapes)


def unflatten(spec, params):
    """Views ``[(W, b), ...]`` into the flat parameter vector."""
    params = np.asarray(params)
    if params.shape != (spec.n_params,):
        raise DimensionMismatch(f"expected {spec.n_params} parameters, got {params.shape}")
    layers = []
    k = 0
    for i, o in spec.layer_shapes:
        W = params[k:k + i * o].reshape(i, o)
        k += i * o
        b = params[k:k + o]
        k += o
        layers.append((W, b))
    return layers


def flatten(layers):
    return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in layers])


def init_params(spec, rng, output_scale=1.0):
    """Fan-in scaled normal weights, zero biases."""
    layers = []
    for n, (i, o) in enumerate(spec.layer_shapes):
        gain = output_scale if n == len(spec.layer_shapes) - 1 else 1.0
        layers.append((rng.normal(size=(i, o)) * gain / np.sqrt(i), np.zeros(o)))
    return flatten(layers)


def _as_batch(spec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise DimensionMismatch(f"expected input of width {spec.input_dim}, got shape {x.shape}")
    return X, single


def _forward(spec, layers, X):
    acts = [X]
    h = X
    last = len(layers) - 1
    for n, (W, b) in enumerate(layers):
        h = h @ W + b
        if n < last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def forward(spec, params, x):
    X, single = _as_batch(spec, x)
    out = _forward(spec, unflatten(spec, params), X)[-1]
    return out[0] if single else out


def backward(spec, params, x, output_gradient, return_input_grad=False):
    """Gradient of ``sum(forward(x) * output_gradient)`` w.r.t. the parameters.

    For a batch input the gradient is summed over rows.  With
    ``return_input_grad`` the gradient w.r.t. ``x`` is returned as well.
    """
    X, single = _as_batch(spec, x)
    G = np.asarray(output_gradient, dtype=float)
    if single:
        G = G[None, :]
    if G.shape != (X.shape[0], spec.output_dim):
        raise DimensionMismatch(f"output gradient shape {G.shape} does not match "
                                f"({X.shape[0]}, {spec.output_dim})")
    layers = unflatten(spec, params)
    acts = _forward(spec, layers, X)
    grads = [None] * len(layers)
    delta = G
    for n in range(len(layers) - 1, -1, -1):
        W, _ = layers[n]
        grads[n] = (acts[n].T @ delta, delta.sum(axis=0))
        delta = delta @ W.T
        if n > 0:
            delta = delta * (1.0 - acts[n] ** 2)
    flat = flatten(grads)
    if return_input_grad:
        return flat, (delta[0] if single else delta)
    return flat


def jvp(spec, params, x, direction):
    """Forward-mode derivative of the output along a parameter direction."""
    X, single = _as_batch(spec, x)
    layers = unflatten(spec, params)
    dlayers = unflatten(spec, direction)
    h, dh = X, np.zeros_like(X)
    last = len(layers) - 1
    for n, ((W, b), (dW, db)) in enumerate(zip(layers, dlayers)):
        z = h @ W + b
        dz = dh @ W + h @ dW + db
        if n < last:
            h = np.tanh(z)
            dh = (1.0 - h * h) * dz
        else:
            h, dh = z, dz
    return dh[0] if single else dh


class RunningNorm:
    """Running mean/variance standardisation of observations.

    Statistics are frozen while ``frozen`` is set (evaluation, serialised
    policies).
    """

    def __init__(self, dim, clip=10.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 1e-4
        self.clip = clip
        self.frozen = False

    @property
    def dim(self):
        return self.mean.shape[0]

    def update(self, batch):
        if self.frozen:
            return
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        n = batch.shape[0]
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * n / total
        m2 = self.var * self.count + b_var * n + delta ** 2 * self.count * n / total
        self.var = m2 / total
        self.count = total

    def __call__(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + 1e-8),
                       -self.clip, self.clip)

    def state(self):
        return {"mean": self.mean.tolist(), "var": self.var.tolist(),
                "count": float(self.count), "clip": float(self.clip)}

    @classmethod
    def from_state(cls, state):
        norm = cls(len(state["mean"]), state["clip"])
        norm.mean = np.array(state["mean"], dtype=float)
        norm.var = np.array(state["var"], dtype=float)
        norm.count = float(state["count"])
        return norm

    def copy(self):
        new = RunningNorm.from_state(self.state())
        new.frozen = self.frozen
        return new


# ---------------------------------------------------------------------------
# policy heads
#
# A head turns the network output (plus its own parameters) into an action
# distribution.  "raw" actions are what the distribution is defined over:
# pre-squash Gaussian samples, or integer levels for the categorical head.


class GaussianDist(NamedTuple):
    mean: np.ndarray      # (N, d), pre-squash
    log_std: np.ndarray   # (d,), clamped


class GaussianHead:
    """Diagonal Gaussian squashed through tanh into [-1, 1].

    With ``u ~ N(mean, std)`` and action ``a = tanh(u)``,
    ``log p(a) = log N(u) - sum log(1 - a**2)``; the second term is the
    log-determinant of the squash Jacobian.  ``log_std`` is a free,
    state-independent parameter vector clamped to [-5, 2].
    """

    kind = "gaussian"

    def __init__(self, act_dim=4, squash=True):
        self.act_dim = act_dim
        self.squash = squash

    @property
    def net_output_dim(self):
        return self.act_dim

    @property
    def n_params(self):
        return self.act_dim

    def init_params(self, log_std=0.0):
        return np.full(self.act_dim, float(log_std))

    def describe(self):
        return {"kind": self.kind, "act_dim": self.act_dim, "squash": self.squash}

    def dist(self, net_out, head_params):
        return GaussianDist(np.atleast_2d(net_out),
                            np.clip(head_params, LOG_STD_MIN, LOG_STD_MAX))

    def _log_std_mask(self, head_params):
        return ((head_params >= LOG_STD_MIN) & (head_params <= LOG_STD_MAX)).astype(float)

    def raw_log_prob(self, dist, u):
        z = (u - dist.mean) * np.exp(-dist.log_std)
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(dist.log_std) - 0.5 * self.act_dim * _LOG_2PI

    def to_action(self, u):
        return np.tanh(u) if self.squash else u

    def to_raw(self, action):
        a = np.asarray(action, dtype=float)
        if not self.squash:
            return a
        if np.any(np.abs(a) >= 1.0):
            raise ActionOutOfSupport("squashed actions must lie strictly inside (-1, 1)")
        return np.arctanh(a)

    def squash_correction(self, action):
        if not self.squash:
            return 0.0
        a = np.asarray(action, dtype=float)
        return -np.sum(np.log1p(-a * a), axis=-1)

    def log_prob(self, dist, action):
        u = self.to_raw(action)
        return self.raw_log_prob(dist, u) + self.squash_correction(action)

    def raw_log_prob_grad(self, dist, u, head_params):
        """Per-sample d log p / d(net output) and d log p / d(head params)."""
        inv_var = np.exp(-2.0 * dist.log_std)
        diff = u - dist.mean
        g_out = diff * inv_var
        g_head = (diff * diff * inv_var - 1.0) * self._log_std_mask(head_params)
        return g_out, g_head

    def kl(self, old, new):
        var_old = np.exp(2.0 * old.log_std)
        var_new = np.exp(2.0 * new.log_std)
        return np.sum(new.log_std - old.log_std
                      + (var_old + (old.mean - new.mean) ** 2) / (2.0 * var_new) - 0.5, axis=-1)

    def fisher_product(self, dist, d_out, d_head, head_params):
        """Fisher metric in (mean, log_std) coordinates applied to a tangent."""
        inv_var = np.exp(-2.0 * dist.log_std)
        mask = self._log_std_mask(head_params)
        return d_out * inv_var, 2.0 * d_head * mask

    def entropy(self, dist):
        """Entropy of the pre-squash Gaussian (per sample)."""
        h = np.sum(dist.log_std) + 0.5 * self.act_dim * (1.0 + _LOG_2PI)
        return np.full(dist.mean.shape[0], h)

    def entropy_grad(self, dist, head_params):
        return np.zeros_like(dist.mean), self._log_std_mask(head_params)

    def sample(self, dist, rng):
        u = dist.mean + np.exp(dist.log_std) * rng.normal(size=dist.mean.shape)
        return u, self.to_action(u)

    def mode(self, dist):
        return self.to_action(dist.mean)


class CategoricalHead:
    """Independent categorical choice of a level for each cable.

    The network emits ``groups * levels`` logits, group-major.
    """

    kind = "categorical"

    def __init__(self, groups=4, levels=5):
        self.groups = groups
        self.levels = levels

    @property
    def net_output_dim(self):
        return self.groups * self.levels

    @property
    def n_params(self):
        return 0

    def init_params(self, log_std=0.0):
        return np.zeros(0)

    def describe(self):
        return {"kind": self.kind, "groups": self.groups, "levels": self.levels}

    def dist(self, net_out, head_params):
        logits = np.atleast_2d(net_out).reshape(-1, self.groups, self.levels)
        logits = logits - logits.max(axis=-1, keepdims=True)
        return logits - np.log(np.exp(logits).sum(axis=-1, keepdims=True))

    def probs(self, dist):
        return np.exp(dist)

    def _check(self, levels):
        a = np.asarray(levels)
        if a.shape[-1] != self.groups or np.any(a < 0) or np.any(a >= self.levels) \
                or not np.all(np.equal(np.mod(a, 1), 0)):
            raise ActionOutOfSupport(f"levels must be {self.groups} integers in "
                                     f"[0, {self.levels - 1}], got {a}")
        return a.astype(int)

    def raw_log_prob(self, dist, levels):
        a = self._check(levels)
        a = np.broadcast_to(a, dist.shape[:2])
        picked = np.take_along_axis(dist, a[..., None], axis=-1)[..., 0]
        return picked.sum(axis=-1)

    log_prob = raw_log_prob

    def to_action(self, levels):
        return levels

    def raw_log_prob_grad(self, dist, levels, head_params):
        a = np.broadcast_to(self._check(levels), dist.shape[:2])
        g = -np.exp(dist)
        np.put_along_axis(g, a[..., None], np.take_along_axis(g, a[..., None], axis=-1) + 1.0,
                          axis=-1)
        return g.reshape(dist.shape[0], -1), np.zeros((dist.shape[0], 0))

    def kl(self, old, new):
        return np.sum(np.exp(old) * (old - new), axis=(-1, -2))

    def fisher_product(self, dist, d_out, d_head, head_params):
        p = np.exp(dist)
        d = d_out.reshape(p.shape)
        out = p * d - p * np.sum(p * d, axis=-1, keepdims=True)
        return out.reshape(d_out.shape), d_head

    def entropy(self, dist):
        return -np.sum(np.exp(dist) * dist, axis=(-1, -2))

    def entropy_grad(self, dist, head_params):
        p = np.exp(dist)
        h = -np.sum(p * dist, axis=-1, keepdims=True)
        return (-p * (dist + h)).reshape(dist.shape[0], -1), np.zeros(0)

    def sample(self, dist, rng):
        p = np.exp(dist)
        cdf = np.cumsum(p, axis=-1)
        draws = rng.random(size=p.shape[:2] + (1,))
        levels = np.minimum((draws > cdf).sum(axis=-1), self.levels - 1)
        return levels, levels

    def mode(self, dist):
        return np.argmax(dist, axis=-1)


def head_from_description(desc):
    if desc["kind"] == "gaussian":
        return GaussianHead(desc["act_dim"], desc.get("squash", True))
    if desc["kind"] == "categorical":
        return CategoricalHead(desc["groups"], desc["levels"])
    raise ValueError(f"unknown head kind {desc['kind']!r}")


# Convenience forms taking raw network outputs.  ``head_params`` defaults to
# the head's initial parameters (log_std = 0 for the Gaussian head).

def _head_dist(head, net_out, head_params):
    hp = head.init_params() if head_params is None else np.asarray(head_params, dtype=float)
    return head.dist(np.asarray(net_out, dtype=float), hp)


def log_prob(head, net_out, action, head_params=None):
    """Log-density of env-space ``action``; squash-corrected for the Gaussian head."""
    return head.log_prob(_head_dist(head, net_out, head_params), action)


def kl_divergence(head, out_old, out_new, params_old=None, params_new=None):
    return head.kl(_head_dist(head, out_old, params_old), _head_dist(head, out_new, params_new))


def sample(head, net_out, rng, head_params=None):
    """Env-space actions drawn from the head's distribution."""
    return head.sample(_head_dist(head, net_out, head_params), rng)[1]


class Policy:
    """MLP + action head + observation normaliser, over one flat parameter vector.

    The flat vector holds the MLP parameters followed by the head's own
    parameters (the Gaussian log-std).
    """

    def __init__(self, spec, head, params=None, normalizer=None, rng=None):
        if spec.output_dim != head.net_output_dim:
            raise DimensionMismatch(f"network output {spec.output_dim} does not match head "
                                    f"input {head.net_output_dim}")
        self.spec = spec
        self.head = head
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = np.concatenate([init_params(spec, rng, output_scale=0.01),
                                     head.init_params()])
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise DimensionMismatch(f"expected {self.n_params} policy parameters, "
                                    f"got {params.shape}")
        self.params = params
        self.normalizer = normalizer or RunningNorm(spec.input_dim)

    @property
    def obs_dim(self):
        return self.spec.input_dim

    @property
    def n_params(self):
        return self.spec.n_params + self.head.n_params

    def split(self, params=None):
        p = self.params if params is None else params
        return p[:self.spec.n_params], p[self.spec.n_params:]

    def dist_normed(self, x, params=None):
        """Distribution for already-normalised observations."""
        net, head = self.split(params)
        return self.head.dist(forward(self.spec, net, x), head)

    def dist(self, obs, params=None):
        return self.dist_normed(self.normalizer(obs), params)

    def act(self, obs, rng, deterministic=False):
        """Return ``(raw_action, env_action, log_prob)`` for one observation."""
        d = self.dist(np.asarray(obs)[None, :])
        if deterministic:
            a = self.head.mode(d)[0]
            return a, a, 0.0
        raw, a = self.head.sample(d, rng)
        return raw[0], a[0], float(self.head.raw_log_prob(d, raw)[0])

    def deterministic_action(self, obs):
        return self.head.mode(self.dist(np.asarray(obs)[None, :]))[0]

    def grad_log_prob_weighted(self, x, raw, weights, params=None):
        """Gradient of ``sum_i weights_i * log p(raw_i | x_i)``."""
        net, head = self.split(params)
        d = self.head.dist(forward(self.spec, net, x), head)
        g_out, g_head = self.head.raw_log_prob_grad(d, raw, head)
        w = weights[:, None]
        g_net = backward(self.spec, net, x, g_out * w)
        return np.concatenate([g_net, (g_head * w).sum(axis=0)])

    def fisher_vector_product(self, x, v, params=None):
        """Mean-KL Hessian (= Fisher matrix) times ``v`` over the batch ``x``."""
        net, head = self.split(params)
        v_net, v_head = v[:self.spec.n_params], v[self.spec.n_params:]
        d = self.head.dist(forward(self.spec, net, x), head)
        d_out = jvp(self.spec, net, x, v_net)
        n = x.shape[0]
        m_out, m_head = self.head.fisher_product(d, d_out, np.broadcast_to(v_head, (n,) + v_head.shape), head)
        g_net = backward(self.spec, net, x, m_out / n)
        g_head = m_head.sum(axis=0) / n if m_head.size else np.zeros(0)
        return np.concatenate([g_net, g_head])

    def expand_inputs(self, new_dim):
        """Copy of this policy accepting ``new_dim`` inputs; extra inputs start with zero weight."""
        if new_dim < self.obs_dim:
            raise ValueError("can only grow the observation")
        extra = new_dim - self.obs_dim
        spec = MlpSpec(new_dim, self.spec.output_dim, self.spec.hidden)
        layers = [(W.copy(), b.copy()) for W, b in unflatten(self.spec, self.split()[0])]
        W0, b0 = layers[0]
        layers[0] = (np.vstack([W0, np.zeros((extra, W0.shape[1]))]), b0)
        norm = RunningNorm(new_dim, self.normalizer.clip)
        norm.mean[:self.obs_dim] = self.normalizer.mean
        norm.var[:self.obs_dim] = self.normalizer.var
        norm.count = self.normalizer.count
        params = np.concatenate([flatten(layers), self.split()[1]])
        return Policy(spec, self.head, params, norm)


class DeterministicPolicy:
    """``a = tanh(mlp(normalise(obs)))``: the actor of a deterministic actor-critic."""

    def __init__(self, spec, params, normalizer=None):
        params = np.asarray(params, dtype=float)
        if params.shape != (spec.n_params,):
            raise DimensionMismatch(f"expected {spec.n_params} actor parameters, "
                                    f"got {params.shape}")
        self.spec = spec
        self.params = params
        self.normalizer = normalizer or RunningNorm(spec.input_dim)

    @property
    def obs_dim(self):
        return self.spec.input_dim

    @property
    def n_params(self):
        return self.spec.n_params

    def deterministic_action(self, obs):
        x = self.normalizer(np.asarray(obs)[None, :])
        return np.tanh(forward(self.spec, self.params, x))[0]


class ValueFunction:
    """State-value MLP; outputs are multiplied by ``scale``."""

    def __init__(self, spec, params=None, scale=1.0, rng=None):
        if spec.output_dim != 1:
            raise DimensionMismatch("value network must have one output")
        self.spec = spec
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = init_params(spec, rng, output_scale=0.01)
        self.params = np.asarray(params, dtype=float)
        self.scale = float(scale)

    def __call__(self, x, params=None):
        p = self.params if params is None else params
        return forward(self.spec, p, x)[..., 0] * self.scale

    def mse_grad(self, x, targets, params=None):
        """Loss ``mean((V - targets)**2) / scale**2`` and its gradient."""
        p = self.params if params is None else params
        pred = forward(self.spec, p, x)[:, 0]
        err = pred - targets / self.scale
        loss = float(np.mean(err * err))
        g = backward(self.spec, p, x, (2.0 * err / len(err))[:, None])
        return loss, g


class Adam:
    def __init__(self, n, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params, grad, lr):
        """Descent step; returns new parameters."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(g, max_norm):
    norm = float(np.linalg.norm(g))
    if norm > max_norm:
        return g * (max_norm / norm), norm
    return g, norm
