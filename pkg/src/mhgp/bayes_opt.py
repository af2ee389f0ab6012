"""Bayesian optimization of the log-target to locate its high-density region."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .gp import GaussianProcess, KernelHyper, add_point, fit_hyperparameters, predict

__all__ = ["BoConfig", "BoResult", "expected_improvement", "acquisition", "propose_next",
           "run_bayes_opt"]


@dataclass
class BoConfig:
    bounds: np.ndarray
    budget: int = 50
    n_candidates: int = 2048
    exploration_weight: float = 0.01
    polish_iters: int = 20

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ValueError("bounds must satisfy low < high")


@dataclass
class BoResult:
    gp: GaussianProcess
    x_best: np.ndarray
    y_best: float
    history: list = field(default_factory=list)


def expected_improvement(mu, sigma, y_best: float, xi: float):
    """Closed-form EI for maximization; zero where ``sigma`` is zero."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    imp = mu - y_best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, imp / sigma, 0.0)
        ei = imp * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma > 0, ei, 0.0)
    return np.maximum(ei, 0.0)


def acquisition(gp: GaussianProcess, x, y_best: float, xi: float = 0.01):
    """Expected improvement of the GP at one point (or each row of ``x``)."""
    x = np.asarray(x, dtype=float)
    mu, var = predict(gp, np.atleast_2d(x))
    ei = expected_improvement(mu, np.sqrt(var), y_best, xi)
    return float(ei[0]) if x.ndim == 1 else ei


def propose_next(gp: GaussianProcess, cfg: BoConfig, y_best: float, rng) -> np.ndarray:
    """Maximize EI over random candidates, then polish the winner locally."""
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]
    cand = rng.uniform(lo, hi, size=(cfg.n_candidates, lo.size))
    ei = acquisition(gp, cand, y_best, cfg.exploration_weight)
    x0 = cand[int(np.argmax(ei))]
    best_ei = float(ei.max())
    if cfg.polish_iters > 0:
        span = hi - lo

        def neg_ei(u):
            return -acquisition(gp, lo + u * span, y_best, cfg.exploration_weight)

        res = minimize(neg_ei, (x0 - lo) / span, method="L-BFGS-B",
                       bounds=[(0.0, 1.0)] * lo.size, options={"maxiter": cfg.polish_iters})
        if np.all(np.isfinite(res.x)) and -res.fun > best_ei:
            x0 = lo + res.x * span
    return np.clip(x0, lo, hi)


def run_bayes_opt(target, x0, cfg: BoConfig, rng, hyper: KernelHyper | None = None) -> BoResult:
    """Evaluate the target at ``x0`` and then at ``cfg.budget`` EI-chosen points.

    Hyperparameters are refit after every evaluation once two points exist
    (the training set is small, so this is cheap). Non-finite values at
    proposed points are stored as the GP's current prior-mean floor.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 lies outside the optimization bounds")
    y0 = target(x0)
    if not np.isfinite(y0):
        raise ValueError("target is not finite at the initial point")
    if hyper is None:
        hyper = KernelHyper(1.0, 0.2 * (hi - lo))
    gp = GaussianProcess.empty(x0.size, hyper)
    gp = add_point(gp, x0, y0, refit=False)
    history = [(x0.copy(), float(y0))]
    x_best, y_best = x0.copy(), float(y0)
    for _ in range(cfg.budget):
        x = propose_next(gp, cfg, y_best, rng)
        y = target(x)
        if not np.isfinite(y):
            y = gp.mean_offset
        history.append((x.copy(), float(y)))
        gp = add_point(gp, x, y, refit=False)
        if gp.n >= 2:
            gp = gp.with_hyper(fit_hyperparameters(gp, init=gp.hyper, restarts=2))
        if y > y_best:
            x_best, y_best = x.copy(), float(y)
    return BoResult(gp, x_best, y_best, history)
