"""Surrogate-accelerated Metropolis-Hastings (MHGP).

A Gaussian process emulates the log-target; Bayesian optimization replaces
burn-in, a Laplace approximation of the surrogate sets the proposal, and the
target is only evaluated where the surrogate is unsure of the acceptance
ratio.
"""

from .bayes_opt import BoConfig, BoResult, acquisition, propose_next, run_bayes_opt
from .diagnostics import (EnergyTestResult, chain_summary, decision_agreement, energy_distance,
                          evaluations_per_window, permutation_test, subsample)
from .gp import (GaussianProcess, JointPrediction, KernelHyper, add_point, fit_hyperparameters,
                 kernel_eval, local_subset, predict, predict_joint)
from .laplace import (ProposalSpec, RefineConfig, default_iso_sigma, ensure_positive_definite,
                      hessian_at, laplace_covariance, refine_random_walk, scale_covariance)
from .samplers import (Chain, DramConfig, MhgpConfig, acceptance_ratio, dram_run,
                       get_target_value, mh_run, mhgp_run, phase_rngs, uncertainty_ratio)
from .targets import (KineticsDataset, KineticsParams, TargetModel, banana_logpdf,
                      banana_target, gaussian_target, generate_synthetic_data,
                      kinetics_loglik, kinetics_rhs, kinetics_solve, kinetics_target)

__version__ = "0.1.0"
