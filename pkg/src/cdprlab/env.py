"""Episodic reach-to-target environment around the point-mass dynamics."""
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .dynamics import DynamicsParams, integrate
from .errors import ActionOutOfBounds, StepBeforeReset
from .geometry import RobotGeometry


@dataclass(frozen=True)
class ActionSpec:
    mode: str = "continuous"
    levels: int = 5

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"unknown action mode {self.mode!r}")
        if self.levels < 2:
            raise ValueError("discrete action needs at least 2 levels")

    @property
    def discrete(self):
        return self.mode == "discrete"


@dataclass(frozen=True)
class RewardConfig:
    """Shaped reward weights.

    ``norm_distance=None`` means "the frame space diagonal of the geometry".
    ``success_bonus`` is paid once, on the step that reaches the target.
    """
    w_improve: float = 50.0
    w_prox: float = 5.0
    norm_distance: Optional[float] = None
    success_bonus: float = 0.0

    def __post_init__(self):
        if self.w_improve < 0 or self.w_prox < 0 or self.success_bonus < 0:
            raise ValueError("reward weights must be >= 0")
        if self.norm_distance is not None and not self.norm_distance > 0:
            raise ValueError("norm_distance must be > 0")


@dataclass(frozen=True)
class NearTarget:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("near-target radius must be > 0")


UNIFORM = "uniform"


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 200
    success_radius: float = 0.05
    start_sampling: Union[str, NearTarget] = UNIFORM
    include_target_velocity: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.success_radius > 0:
            raise ValueError("success_radius must be > 0")
        if self.start_sampling != UNIFORM and not isinstance(self.start_sampling, NearTarget):
            raise ValueError(f"bad start_sampling {self.start_sampling!r}")
        if (isinstance(self.start_sampling, NearTarget)
                and self.start_sampling.radius <= self.success_radius):
            raise ValueError("near-target radius must exceed success_radius")

    @property
    def obs_dim(self):
        return 12 if self.include_target_velocity else 9


CURRICULUM_BASE_RADIUS = 0.2


def curriculum_reset_distribution(stage, base=None, geom=None):
    """Near-target start sampling for curriculum ``stage``.

    The radius grows linearly, ``0.2 * (1 + stage)``, and saturates at the
    workspace diagonal (where it covers the whole box).
    """
    if stage < 0:
        raise ValueError("stage must be >= 0")
    geom = geom or RobotGeometry()
    base = base or EpisodeConfig()
    radius = min(CURRICULUM_BASE_RADIUS * (1 + stage), geom.workspace_diagonal)
    return replace(base, start_sampling=NearTarget(radius))


def action_to_tensions(spec, action, max_tension):
    a = np.asarray(action)
    if a.shape != (4,):
        raise ActionOutOfBounds(f"expected 4 action components, got shape {a.shape}")
    if spec.discrete:
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.equal(np.mod(a, 1), 0)):
                raise ActionOutOfBounds(f"discrete action must be integer levels, got {a}")
        if np.any(a < 0) or np.any(a > spec.levels - 1):
            raise ActionOutOfBounds(f"levels must lie in [0, {spec.levels - 1}], got {a}")
        return a.astype(float) / (spec.levels - 1) * max_tension
    a = a.astype(float)
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0):
        raise ActionOutOfBounds(f"continuous action must lie in [-1, 1], got {a}")
    return (a + 1.0) / 2.0 * max_tension


def reward(cfg, d_prev, d_curr, norm_distance=None):
    """Distance improvement plus a linear proximity ramp."""
    norm = norm_distance if norm_distance is not None else cfg.norm_distance
    if norm is None:
        norm = RobotGeometry().frame_diagonal
    proximity = 1.0 - min(d_curr / norm, 1.0)
    return cfg.w_improve * (d_prev - d_curr) + cfg.w_prox * proximity


def make_observation(position, velocity, target, target_velocity=None):
    parts = [position, velocity, target]
    if target_velocity is not None:
        parts.append(target_velocity)
    return np.concatenate(parts).astype(float)


class CdprEnv:
    """Reach-to-target episodes for the 4-cable robot.

    Not thread-safe: one instance belongs to one control loop.
    """

    def __init__(self, geom=None, params=None, episode=None, reward_cfg=None, action_spec=None):
        self.geom = geom or RobotGeometry()
        self.params = params or DynamicsParams()
        self.episode = episode or EpisodeConfig()
        self.reward_cfg = reward_cfg or RewardConfig()
        self.action_spec = action_spec or ActionSpec()
        self.norm_distance = (self.reward_cfg.norm_distance
                              if self.reward_cfg.norm_distance is not None
                              else self.geom.frame_diagonal)
        self.rng = np.random.default_rng(self.episode.rng_seed)
        self.position = None
        self.velocity = None
        self.target = None
        self.steps = 0
        self.prev_distance = None

    @property
    def obs_dim(self):
        return self.episode.obs_dim

    def set_episode(self, episode):
        """Swap sampling/termination settings, keeping the random stream."""
        if episode.obs_dim != self.episode.obs_dim:
            raise ValueError("cannot change observation size of a live environment")
        self.episode = episode

    def _uniform_point(self):
        lo, hi = self.geom.workspace_min, self.geom.workspace_max
        return lo + (hi - lo) * self.rng.random(3)

    def _near(self, center, radius):
        while True:
            direction = self.rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            p = center + direction * radius * self.rng.random() ** (1.0 / 3.0)
            if np.all(p >= self.geom.workspace_min) and np.all(p <= self.geom.workspace_max):
                return p

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.target = self._uniform_point()
        sampling = self.episode.start_sampling
        # a start already inside the success ball would be a free episode
        while True:
            if isinstance(sampling, NearTarget):
                start = self._near(self.target, sampling.radius)
            else:
                start = self._uniform_point()
            if np.linalg.norm(start - self.target) > self.episode.success_radius:
                break
        return self.place(start, self.target)

    def place(self, position, target, velocity=None):
        """Start an episode from an explicit state (scripted tests, demos)."""
        self.position = np.array(position, dtype=float)
        self.target = np.array(target, dtype=float)
        self.velocity = np.zeros(3) if velocity is None else np.array(velocity, dtype=float)
        self.steps = 0
        self.prev_distance = float(np.linalg.norm(self.position - self.target))
        return self.observation()

    def observation(self):
        target_velocity = np.zeros(3) if self.episode.include_target_velocity else None
        return make_observation(self.position, self.velocity, self.target, target_velocity)

    def step(self, action):
        if self.position is None:
            raise StepBeforeReset("call reset() before step()")
        tensions = action_to_tensions(self.action_spec, action, self.params.max_tension)
        self.position, self.velocity, clamped = integrate(
            self.geom, self.params, self.position, self.velocity, tensions)
        self.steps += 1
        d_prev = self.prev_distance
        d_curr = float(np.linalg.norm(self.position - self.target))
        r = reward(self.reward_cfg, d_prev, d_curr, self.norm_distance)
        # also counts a start already inside the success ball
        terminated = min(d_prev, d_curr) <= self.episode.success_radius
        if terminated:
            r += self.reward_cfg.success_bonus
        truncated = self.steps >= self.episode.max_steps and not terminated
        self.prev_distance = d_curr
        info = {"distance": d_curr, "d_prev": d_prev, "tensions": tensions,
                "clamped": clamped, "success": terminated}
        return self.observation(), r, terminated, truncated, info
