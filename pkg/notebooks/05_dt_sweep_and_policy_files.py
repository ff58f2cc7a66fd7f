"""
Control-interval sweep and policy files
=======================================

Tracking accuracy as the control interval grows, with the PID re-tuned at
every interval, and a trained policy saved to disk and loaded back.
"""

# %%
import os
import tempfile

import numpy as np

from cdprlab.config import ExperimentConfig
from cdprlab.persistence import load_policy, save_policy
from cdprlab.pid import PidController
from cdprlab.rl import train
from cdprlab.trajectories import PolicyController, default_trajectories, dt_sweep

circle = default_trajectories()["circle"]
rows = dt_sweep([PidController()], circle, [0.05, 0.1, 0.2, 0.4])
for r in rows:
    print(f"{r.controller} dt={r.dt:<5} rms={r.rms:.5f} diverged={r.diverged} {r.gains}")

# %%
cfg = ExperimentConfig()
policy = train("trpo", cfg, 2000, seed=1).policy
path = os.path.join(tempfile.mkdtemp(), "trpo.pol")
save_policy(path, policy, {"algo": "trpo", "seed": 1})
loaded = load_policy(path)
print(open(path, "rb").readline())
print(sorted(loaded.header))
print(np.array_equal(loaded.policy.params, policy.params))

# %%
# The policy treats the next waypoint as its target.
for r in dt_sweep([PolicyController(loaded.policy, "trpo")], circle, [0.1, 0.2, 0.4]):
    print(f"{r.controller} dt={r.dt:<5} rms={r.rms:.4f} diverged={r.diverged}")
