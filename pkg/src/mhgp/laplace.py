"""Proposal covariance from a Laplace approximation of the GP surrogate."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .gp import GaussianProcess, add_point, kernel_matrix, local_subset, predict_joint

logger = logging.getLogger(__name__)

HAARIO_SCALE = "haario"
DEFAULT_SCALE = 0.5


def haario_scale(dim: int) -> float:
    return 2.4**2 / dim


@dataclass(frozen=True)
class ProposalSpec:
    """Gaussian random-walk proposal ``N(x, scale * covariance)``."""

    covariance: np.ndarray
    scale: float
    cholesky_factor: np.ndarray

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @property
    def scaled_covariance(self) -> np.ndarray:
        return self.scale * self.covariance

    def step(self, z: np.ndarray) -> np.ndarray:
        """Map a standard-normal vector to a proposal increment."""
        return self.cholesky_factor @ z

    def sample(self, x, rng) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.step(rng.standard_normal(self.dim))


def default_iso_sigma(bounds) -> float:
    """5% of the bound widths, geometric mean across dimensions."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    widths = b[:, 1] - b[:, 0]
    if not np.all(np.isfinite(widths)):
        raise ValueError("iso_sigma needs finite bounds to derive a default")
    return float(0.05 * np.exp(np.mean(np.log(widths))))


@dataclass
class RefineConfig:
    """Refinement walk settings; ``iso_sigma=None`` derives the step from bounds."""

    steps: int = 100
    iso_sigma: float | None = None
    recheck_every: int = 25

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.iso_sigma is not None and not self.iso_sigma > 0:
            raise ValueError("iso_sigma must be positive")
        if self.recheck_every < 1:
            raise ValueError("recheck_every must be >= 1")


def hessian_at(gp: GaussianProcess, x) -> np.ndarray:
    """Analytic Hessian of the GP posterior mean at ``x``."""
    x = np.asarray(x, dtype=float).reshape(gp.dim)
    if gp.n == 0:
        return np.zeros((gp.dim, gp.dim))
    _, alpha = gp._factor()
    inv_l2 = 1.0 / gp.hyper.lengthscales**2
    k = kernel_matrix(gp.X, x[None, :], gp.hyper)[:, 0]
    U = (x - gp.X) * inv_l2
    w = alpha * k
    H = (U * w[:, None]).T @ U - np.diag(inv_l2) * w.sum()
    return 0.5 * (H + H.T)


def laplace_covariance(H) -> np.ndarray | None:
    """Return ``(-H)^-1`` if ``-H`` is positive definite, else None."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-8:
        raise ValueError("Hessian is not symmetric")
    try:
        L = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        return None
    Linv = np.linalg.solve(L, np.eye(H.shape[0]))
    cov = Linv.T @ Linv
    return 0.5 * (cov + cov.T)


def ensure_positive_definite(cov, floor: float | None = None) -> np.ndarray:
    """Clip eigenvalues of a symmetric matrix to at least ``floor``.

    The default floor is ``1e-6 * trace / d`` (or 1e-6 for a non-positive
    trace). A matrix whose eigenvalues already clear the floor is returned
    as is.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-8:
        raise ValueError("covariance is not symmetric")
    d = cov.shape[0]
    if floor is None:
        tr = np.trace(cov) / d
        floor = 1e-6 * tr if tr > 0 else 1e-6
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() >= floor:
        return cov.copy()
    return (V * np.maximum(w, floor)) @ V.T


def scale_covariance(cov, scale: float) -> ProposalSpec:
    if not scale > 0:
        raise ValueError("scale must be positive")
    cov = np.atleast_2d(np.asarray(cov, dtype=float)).copy()
    L = np.linalg.cholesky(scale * cov)
    return ProposalSpec(cov, float(scale), L)


def isotropic_proposal(dim: int, sigma: float) -> ProposalSpec:
    return scale_covariance(sigma**2 * np.eye(dim), 1.0)


def local_cov_check(gp: GaussianProcess, x, cov, scale: float, threshold: float, k: int) -> bool:
    """True when the surrogate is confident one proposal step away from ``x``.

    Probes ``x +/- sqrt(scale) * L e_i`` along each axis of the Cholesky
    factor of ``cov`` and compares the acceptance-ratio CoV to ``threshold``.
    """
    from .samplers import uncertainty_ratio

    L = np.linalg.cholesky(scale * cov)
    for sign in (1.0, -1.0):
        for i in range(gp.dim):
            probe = x + sign * L[:, i]
            jp = predict_joint(local_subset(gp, x, probe, k), x, probe)
            if uncertainty_ratio(jp) > threshold:
                return False
    return True


def refine_random_walk(
    gp: GaussianProcess,
    target,
    x0,
    cfg: RefineConfig,
    rng,
    threshold: float = 0.1,
    scale: float = DEFAULT_SCALE,
    local_k: int = 50,
    y0: float | None = None,
):
    """Isotropic random-walk Metropolis that feeds every evaluation into the GP.

    Every ``cfg.recheck_every`` steps the Laplace covariance at the best
    point so far is attempted; the walk stops early once it is positive
    definite and the surrogate is confident within one proposal step.

    Returns ``(gp, x_best)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    if cfg.steps == 0:
        return gp, x
    if y0 is None:
        idx = gp.contains(x)
        y0 = gp.y[idx] if idx is not None else target(x)
        if idx is None:
            gp = add_point(gp, x, y0)
    lp = float(y0)
    x_best, y_best = x.copy(), lp
    sigma = cfg.iso_sigma if cfg.iso_sigma is not None else default_iso_sigma(target.bounds)
    for step in range(1, cfg.steps + 1):
        u = rng.uniform()
        x_new = x + sigma * rng.standard_normal(gp.dim)
        if target.in_bounds(x_new):
            lp_new = target(x_new)
            if np.isfinite(lp_new):
                gp = add_point(gp, x_new, lp_new)
                if lp_new > y_best:
                    x_best, y_best = x_new.copy(), lp_new
                if u < min(1.0, np.exp(lp_new - lp)):
                    x, lp = x_new, lp_new
        if step % cfg.recheck_every == 0 and gp.n >= gp.dim + 2:
            cov = laplace_covariance(hessian_at(gp, x_best))
            if cov is not None and local_cov_check(gp, x_best, cov, scale, threshold, local_k):
                logger.debug("refinement stopped after %d steps", step)
                break
    return gp, x_best


def build_proposal(gp: GaussianProcess, x_mode, scale: float, fallback_sigma: float) -> ProposalSpec:
    """Laplace proposal at ``x_mode``, or an isotropic one if the Hessian is unusable."""
    cov = laplace_covariance(hessian_at(gp, x_mode))
    if cov is None or not np.all(np.isfinite(cov)):
        logger.warning("Laplace covariance not positive definite; using isotropic proposal")
        cov = fallback_sigma**2 * np.eye(gp.dim)
    cov = ensure_positive_definite(cov)
    return scale_covariance(cov, scale)
