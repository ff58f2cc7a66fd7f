"""Experiment configuration: flat ``section.key = value`` text files.

Every key has a default; unknown keys are errors.  ``resolved_text`` gives the
fully resolved configuration, which is echoed into output headers.
"""
import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Tuple

import numpy as np

from .dynamics import DynamicsParams
from .env import UNIFORM, ActionSpec, EpisodeConfig, NearTarget, RewardConfig
from .errors import ConfigError
from .geometry import RobotGeometry
from .rl.common import GaeConfig
from .rl.ddpg import DdpgConfig
from .rl.ppo import PpoConfig
from .rl.trpo import TrpoConfig

CONFIG_DIR_ENV = "CDPRLAB_CONFIG_DIR"


@dataclass
class GeometrySection:
    anchor1: Tuple[float, ...] = (0.0, 0.0, 3.22)
    anchor2: Tuple[float, ...] = (2.31, 0.0, 3.22)
    anchor3: Tuple[float, ...] = (2.31, 2.81, 3.22)
    anchor4: Tuple[float, ...] = (0.0, 2.81, 3.22)
    workspace_min: Tuple[float, ...] = (0.3, 0.3, 0.3)
    workspace_max: Tuple[float, ...] = (2.01, 2.51, 2.5)


@dataclass
class DynamicsSection:
    mass: float = 1.0
    gravity: float = 9.81
    dt: float = 0.1
    max_tension: float = 20.0


@dataclass
class EpisodeSection:
    max_steps: int = 200
    success_radius: float = 0.05
    # "uniform" or "near:<radius>"
    start_sampling: str = "near:0.2"
    include_target_velocity: bool = False


@dataclass
class RewardSection:
    w_improve: float = 50.0
    w_prox: float = 5.0
    # "auto" = frame space diagonal
    norm_distance: str = "auto"
    success_bonus: float = 10000.0


@dataclass
class ActionSection:
    mode: str = "continuous"
    levels: int = 5


@dataclass
class NetworkSection:
    hidden: Tuple[int, ...] = (64, 64)
    init_log_std: float = -1.0
    # "hover": output bias gives the center equilibrium tensions; "zero": plain init
    init_action: str = "hover"
    value_scale: float = 1000.0


@dataclass
class ScheduleSection:
    lr_max: float = 3e-4
    lr_min: float = 3e-5
    warmup_fraction: float = 0.05


@dataclass
class CurriculumSection:
    enabled: bool = True
    promote_success: float = 0.8
    max_stage: int = 4


@dataclass
class TrainSection:
    algo: str = "trpo"
    budget: int = 50_000
    batch_steps: int = 1000
    checkpoint_interval: int = 0


@dataclass
class PidSection:
    # "auto" or "kp,ki,kd"
    gains: str = "auto"
    integral_limit: float = 1.0


SECTIONS = {
    "geometry": GeometrySection,
    "dynamics": DynamicsSection,
    "episode": EpisodeSection,
    "reward": RewardSection,
    "action": ActionSection,
    "network": NetworkSection,
    "schedule": ScheduleSection,
    "curriculum": CurriculumSection,
    "gae": GaeConfig,
    "trpo": TrpoConfig,
    "ppo": PpoConfig,
    "ddpg": DdpgConfig,
    "train": TrainSection,
    "pid": PidSection,
}


@dataclass
class ExperimentConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    episode: EpisodeSection = field(default_factory=EpisodeSection)
    reward: RewardSection = field(default_factory=RewardSection)
    action: ActionSection = field(default_factory=ActionSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    curriculum: CurriculumSection = field(default_factory=CurriculumSection)
    gae: GaeConfig = field(default_factory=GaeConfig)
    trpo: TrpoConfig = field(default_factory=TrpoConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)
    train: TrainSection = field(default_factory=TrainSection)
    pid: PidSection = field(default_factory=PidSection)
    seed: int = 0

    # -- typed views -------------------------------------------------------

    def geometry_obj(self):
        g = self.geometry
        return RobotGeometry(np.array([g.anchor1, g.anchor2, g.anchor3, g.anchor4]),
                             np.array(g.workspace_min), np.array(g.workspace_max))

    def dynamics_obj(self):
        d = self.dynamics
        return DynamicsParams(d.mass, d.gravity, d.dt, d.max_tension)

    def episode_obj(self, seed=None):
        e = self.episode
        return EpisodeConfig(e.max_steps, e.success_radius, parse_sampling(e.start_sampling),
                             e.include_target_velocity, self.seed if seed is None else seed)

    def reward_obj(self):
        r = self.reward
        norm = None if r.norm_distance == "auto" else float(r.norm_distance)
        return RewardConfig(r.w_improve, r.w_prox, norm, r.success_bonus)

    def action_obj(self):
        return ActionSpec(self.action.mode, self.action.levels)

    def validate(self):
        """Build every typed object so bad values surface before any work starts."""
        checks = [self.geometry_obj, self.dynamics_obj, self.episode_obj, self.reward_obj,
                  self.action_obj]
        for section, build in zip(("geometry", "dynamics", "episode", "reward", "action"), checks):
            try:
                build()
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {exc}", key=section) from exc
        if self.train.algo not in ("trpo", "ppo", "ddpg"):
            raise ConfigError(f"unknown algorithm {self.train.algo!r}", key="train.algo")
        if self.train.algo == "ddpg" and self.action.mode != "continuous":
            raise ConfigError("ddpg needs continuous actions", key="action.mode")
        if self.network.init_action not in ("hover", "zero"):
            raise ConfigError("network.init_action must be 'hover' or 'zero'",
                              key="network.init_action")
        if self.train.budget < 0 or self.train.batch_steps < 1:
            raise ConfigError("train.budget must be >= 0 and train.batch_steps >= 1",
                              key="train.budget")
        if not 0 <= self.schedule.warmup_fraction < 1:
            raise ConfigError("schedule.warmup_fraction must lie in [0, 1)",
                              key="schedule.warmup_fraction")
        return self


def parse_sampling(text):
    text = str(text).strip()
    if text == UNIFORM:
        return UNIFORM
    if text.startswith("near:"):
        return NearTarget(float(text[5:]))
    raise ValueError(f"start_sampling must be 'uniform' or 'near:<radius>', got {text!r}")


def format_sampling(sampling):
    return UNIFORM if sampling == UNIFORM else f"near:{sampling.radius!r}"


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_format(v) for v in value)
    return str(value)


def _parse(text, default, key):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            elem = type(default[0]) if default else float
            return tuple(elem(p) for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}", key=key) from None


def set_key(cfg, key, text):
    """Set dotted ``key`` from its text form, rejecting unknown keys."""
    if key == "seed":
        cfg.seed = _parse(text, 0, key)
        return cfg
    section, _, name = key.partition(".")
    if section not in SECTIONS or not name:
        raise ConfigError(f"unknown configuration key {key!r}", key=key)
    current = getattr(cfg, section)
    names = {f.name for f in fields(current)}
    if name not in names:
        raise ConfigError(f"unknown configuration key {key!r}", key=key)
    value = _parse(text, getattr(current, name), key)
    try:
        setattr(cfg, section, dataclasses.replace(current, **{name: value}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {exc}", key=key) from exc
    return cfg


def parse_config(text, base=None):
    cfg = base if base is not None else ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=None)
        key, value = line.split("=", 1)
        set_key(cfg, key.strip(), value)
    return cfg


def resolve_path(path):
    """Relative config paths are looked up in ``$CDPRLAB_CONFIG_DIR`` when not found locally."""
    if os.path.exists(path) or os.path.isabs(path):
        return path
    base = os.environ.get(CONFIG_DIR_ENV)
    if base:
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    return path


def load_config(path, overrides=()):
    path = resolve_path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key=None) from exc
    cfg = parse_config(text)
    for key, value in overrides:
        set_key(cfg, key, value)
    return cfg


def items(cfg):
    """``(dotted_key, text_value)`` pairs in a stable order."""
    out = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            out.append((f"{section}.{f.name}", _format(getattr(obj, f.name))))
    out.append(("seed", _format(cfg.seed)))
    return out


def resolved_text(cfg):
    return "".join(f"{k} = {v}\n" for k, v in items(cfg))
