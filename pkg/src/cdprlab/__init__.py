"""Simulation and control laboratory for a 4-cable underconstrained parallel robot."""
from .dynamics import DynamicsParams, EndEffectorState
from .env import ActionSpec, CdprEnv, EpisodeConfig, NearTarget, RewardConfig
from .geometry import Pose, RobotGeometry

__version__ = "0.1.0"
