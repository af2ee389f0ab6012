"""
Evaluations thin out as the surrogate learns
============================================

Each true evaluation is added to the GP, so regions the chain revisits become
cheap. Counting evaluations in windows of 1500 iterations shows the rate
falling over the run.
"""

import numpy as np

from mhgp import BoConfig, MhgpConfig, RefineConfig, banana_target, mhgp_run
from mhgp.diagnostics import evaluations_per_window

cfg = MhgpConfig(
    iterations=15000,
    bo=BoConfig(bounds=[[-25, 25], [-30, 20]]),
    x0=[-10.0, -10.0],
    refine=RefineConfig(iso_sigma=1.0),
)

for seed in range(3):
    chain = mhgp_run(banana_target(), cfg, rng=seed)
    counts = evaluations_per_window(chain.evaluated, 1500)
    print("seed %d  sampling evals %3d  per window %s"
          % (seed, chain.phase_counts["sampling"], counts.tolist()))

###############################################################################
# A text histogram of the last run.

for i, c in enumerate(counts):
    print("%6d-%6d | %s" % (i * 1500, (i + 1) * 1500 - 1, "#" * int(c)))

# cumulative evaluations against iteration, ready for plotting
np.savetxt("evaluation_decay.csv",
           np.c_[np.arange(len(chain)), np.cumsum(chain.evaluated)],
           delimiter=",", header="iteration,cumulative_evals", comments="", fmt="%d")
