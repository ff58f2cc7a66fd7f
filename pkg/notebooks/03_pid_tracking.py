"""
PID tracking of circles and spirals
===================================

A task-space PID with gravity feedforward computes a force, which is
distributed onto the cables.  Gains are picked by grid search on each path.
"""

# %%
import numpy as np

from cdprlab import DynamicsParams, RobotGeometry
from cdprlab.pid import PidController, PidGains, search_gains
from cdprlab.trajectories import InverseDynamicsController, default_trajectories, generate, track

geom = RobotGeometry()
paths = default_trajectories()
for name, spec in paths.items():
    times, pos, vel = generate(spec, 0.1)
    print(name, spec.kind, "start", pos[0], "end", pos[-1])

# %%
# The inverse-dynamics controller lands exactly on every waypoint, which
# checks the tracking harness itself.
for name, spec in paths.items():
    print(name, track(InverseDynamicsController(), geom, DynamicsParams(), spec, 0.1).rms)

# %%
# Hand-picked gains first.
params = DynamicsParams(dt=0.01)
result = track(PidController(PidGains(15, 0.5, 5)), geom, params, paths["circle"], 0.01)
print("rms", result.rms, "max error", result.errors.max())

# %%
# Grid search over the default 27 candidates.
gains, rms, table = search_gains(geom, params, paths["circle"])
print("best", gains.as_text(), "rms", rms)
for g, r, diverged in sorted(table, key=lambda row: row[1])[:5]:
    print(f"  {g.as_text():24s} {r:.5f} {'diverged' if diverged else ''}")

# %%
# Error along the path for the tuned gains.
result = track(PidController(gains), geom, params, paths["spiral1"], 0.01)
for k in range(0, len(result.times), 500):
    print(f"t={result.times[k]:5.1f}  err={result.errors[k] * 1000:.3f} mm")
