"""
Training TRPO and PPO on the reach task
=======================================

Both learners start from a policy whose output bias holds the mass at the
workspace center.  The budget here is small so the script finishes in a few
seconds; raise BUDGET to 50000 for the full runs.
"""

# %%
import numpy as np

from cdprlab.config import ExperimentConfig, set_key
from cdprlab.rl import evaluate, random_baseline, train

BUDGET = 5000

cfg = ExperimentConfig()
print("random policy", random_baseline(cfg, episodes=20))

# %%
result = train("trpo", cfg, BUDGET, seed=0)
for m in result.metrics:
    print(f"iter {m['iteration']:2d}  reward {m['mean_episode_reward']:8.1f}  "
          f"length {m['mean_episode_length']:6.1f}  kl {m['kl']:.4f}  accepted {m['accepted']}")

# %%
print("TRPO after training", evaluate(result.policy, cfg, episodes=20))

# %%
# The discrete variant picks one of five tension levels per cable.
set_key(cfg, "action.mode", "discrete")
result = train("ppo", cfg, BUDGET, seed=0)
print("PPO discrete", evaluate(result.policy, cfg, episodes=20))

# %%
# Same seed, same configuration: the metrics repeat exactly.
again = train("ppo", cfg, BUDGET, seed=0)
print(repr(again.metrics) == repr(result.metrics))
