"""Policy optimisation: TRPO, PPO (continuous and discrete) and DDPG."""
from .common import (GaeConfig, LrSchedule, ReplayBuffer, RolloutBatch, Runner,
                     collect_rollouts, cosine_warmup_lr, gae_advantages)
from .ddpg import DdpgAgent, DdpgConfig, ddpg_update
from .ppo import PpoConfig, clipped_objective, ppo_update
from .training import TrainResult, evaluate, random_baseline, train
from .trpo import TrpoConfig, conjugate_gradient, trpo_update
