"""What the configuration looks like after many steps.

Runs the dynamics until almost every agent has either frozen inside a merged
pair or keeps drifting toward one, reports the split, then checks the
closed-form trajectory of a stable chain against a direct simulation.

    python3 demos/long_run.py [side]
"""
import sys

import numpy as np

from poisson_follower import (StableChain, Window, branching_break_step, limit_report, run,
                              sample_poisson, stable_position)
from poisson_follower.sampler import Configuration, core_region

side = float(sys.argv[1]) if len(sys.argv) > 1 else 60.0
config = sample_poisson(Window.square(side), 1.0, seed=5)
traj = run(config, 60, memory_cap=1)
core = core_region(config.window, 5.0).contains(config.xy)
r = limit_report(traj, mask=core)
print(f"{len(config)} agents, 60 steps")
print(f"  frozen (ultimate leaders):   {r.lambda_l:.3f}")
print(f"  still moving (followers):    {r.lambda_f:.3f}")
print(f"  followers per leader:        {r.n_bar:.3f}")
print(f"  mean party size:             {r.mean_party_size:.3f}")

# A chain hanging off a merged pair at the origin moves by binomial averages.
chain = StableChain((0.0, 0.0), [(1.0, 0.0), (2.5, 0.4), (5.0, 1.5)])
pts = [(0.0, 0.0), (0.0, 0.0), *chain.positions]
sim = run(Configuration(np.arange(len(pts)), pts, Window(-1, 6, -1, 3)), 12)
err = max(float(np.abs(stable_position(chain, n, i) - sim.config_at(i).xy[n + 1]).max())
          for i in range(13) for n in range(1, 4))
print(f"\nstable chain: closed form vs simulation, max error {err:.1e}")

# Two followers of the chain's tip draw together faster than the tip moves
# away, so the pair eventually splits off; wider pairs hold out longer.
tip = np.array(chain.positions[-1])
for spread in (4.0, 16.0, 64.0):
    s1, s2 = tip + (spread, 0.8 * spread), tip + (spread, -0.8 * spread)
    print(f"siblings {spread:g} beyond the tip break off after "
          f"{branching_break_step(chain, s1, s2)} steps")
