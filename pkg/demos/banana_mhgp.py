"""
Sampling the banana distribution with a GP surrogate
====================================================

A twisted Gaussian in two dimensions. The chain starts far from the ridge at
(-10, -10); Bayesian optimization finds the high-density region, a short
random walk feeds the surrogate, and the sampler then runs 15000 iterations
while calling the true density only when the surrogate is unsure.
"""

import numpy as np

from mhgp import BoConfig, MhgpConfig, RefineConfig, banana_target, mhgp_run
from mhgp.diagnostics import chain_summary

target = banana_target(b=0.1, record=True)

cfg = MhgpConfig(
    iterations=15000,
    bo=BoConfig(bounds=[[-25, 25], [-30, 20]], budget=50),
    x0=[-10.0, -10.0],
    threshold=0.1,
    refine=RefineConfig(steps=100, iso_sigma=1.0),
)
chain = mhgp_run(target, cfg, rng=0)

###############################################################################
# Where did the evaluations go?

print("evaluations by phase:", chain.phase_counts)
print("total:", chain.eval_count_total, "for", len(chain), "iterations")

###############################################################################
# The proposal covariance came from the curvature of the surrogate at the mode.

print("proposal covariance:\n", np.round(chain.proposal.scaled_covariance, 3))

###############################################################################
# Moments of the chain. The exact marginals are x1 ~ N(0, 100) and
# E[x2] = 10 - 0.1 * E[x1^2] = 0.

s = chain_summary(chain)
print("mean:", np.round(s["mean"], 2), " std:", np.round(s["std"], 2))
print("acceptance rate: %.2f" % s["acceptance_rate"])

# the first few true evaluations of the sampling phase
for r in [r for r in target.records if r["phase"] == "sampling"][:5]:
    print("  iteration %5d  x = %s  log p = %.3f"
          % (r["iteration"], np.round(r["point"], 2), r["log_density"]))
