"""Gaussian-process regression on the log of a target density.

The surrogate uses a squared-exponential kernel with one lengthscale per
input dimension (ARD) and a constant prior mean placed well below the
observed data, so predictions decay toward low log-density away from the
training set.

A :class:`GaussianProcess` is an immutable value: :func:`add_point` returns a
new instance and never modifies the one it was given.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

__all__ = [
    "KernelHyper",
    "GaussianProcess",
    "JointPrediction",
    "DuplicatePointWarning",
    "FitWarning",
    "kernel_eval",
    "kernel_matrix",
    "stable_cholesky",
    "add_point",
    "fit_hyperparameters",
    "log_marginal_likelihood",
    "predict",
    "predict_joint",
    "local_subset",
    "default_mean_offset",
]

NOISE_FLOOR = 1e-8
DUPLICATE_TOL = 1e-12
JITTER_START = 1e-10
JITTER_MAX = 1e-4
REFIT_EVERY = 25
FIT_RESTARTS = 5
# Hyperparameter fits use at most this many training points.
FIT_MAX_POINTS = 250
# Upper lengthscale bound, as a multiple of the data span per dimension.
LENGTHSCALE_MAX_SPAN = 100.0


class DuplicatePointWarning(UserWarning):
    """Raised (as a warning) when an insert duplicates an existing input."""


class FitWarning(UserWarning):
    """Hyperparameter optimization did not converge on any restart."""


@dataclass(frozen=True)
class KernelHyper:
    """Squared-exponential ARD kernel hyperparameters."""

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float = NOISE_FLOOR

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive and finite")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be non-negative")

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def to_dict(self) -> dict:
        return {
            "signal_variance": float(self.signal_variance),
            "lengthscales": [float(v) for v in self.lengthscales],
            "noise_variance": float(self.noise_variance),
        }


@dataclass(frozen=True)
class JointPrediction:
    """Posterior over the log-density at a current point and a proposed point."""

    mu: float
    mu_star: float
    var_xx: float
    var_ss: float
    cov_xs: float

    @property
    def ratio_variance(self) -> float:
        """Variance of ``ln p(x*) - ln p(x)``."""
        return self.var_xx + self.var_ss - 2.0 * self.cov_xs

    def swapped(self) -> "JointPrediction":
        return JointPrediction(self.mu_star, self.mu, self.var_ss, self.var_xx, self.cov_xs)


def default_mean_offset(y: np.ndarray) -> float:
    """Constant prior mean: two standard deviations below the smallest value."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return 0.0
    return float(y.min() - 2.0 * y.std())


def _as_point(x, dim: int | None = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("expected a 1-d point, got shape %s" % (x.shape,))
    if dim is not None and x.size != dim:
        raise ValueError("dimension mismatch: expected %d, got %d" % (dim, x.size))
    return x


def kernel_eval(a, b, hyper: KernelHyper) -> float:
    """Squared-exponential ARD covariance between two points."""
    a = _as_point(a, hyper.dim)
    b = _as_point(b, hyper.dim)
    r = (a - b) / hyper.lengthscales
    return float(hyper.signal_variance * np.exp(-0.5 * np.dot(r, r)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, hyper: KernelHyper) -> np.ndarray:
    """Cross-covariance matrix ``k(A_i, B_j)``."""
    A = np.atleast_2d(A) / hyper.lengthscales
    B = np.atleast_2d(B) / hyper.lengthscales
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return hyper.signal_variance * np.exp(-0.5 * sq)


def stable_cholesky(K: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Jitter starts at ``1e-10 * scale`` and grows tenfold up to ``1e-4 * scale``.
    """
    try:
        return la.cholesky(K, lower=True, check_finite=False)
    except la.LinAlgError:
        pass
    jitter = JITTER_START
    n = K.shape[0]
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return la.cholesky(K + jitter * scale * np.eye(n), lower=True, check_finite=False)
        except la.LinAlgError:
            jitter *= 10.0
    raise la.LinAlgError("matrix not positive definite after maximum jitter")


@dataclass(frozen=True, eq=False)
class GaussianProcess:
    """GP surrogate of ``ln p(x)``.

    Parameters
    ----------
    X : (n, d) array
        Training inputs, pairwise distinct.
    y : (n,) array
        Log-density values at ``X``.
    hyper : KernelHyper
        Kernel hyperparameters.
    mean_offset : float, optional
        Constant prior mean. Computed from ``y`` when omitted.
    inserts_since_fit : int
        Insertions since the last hyperparameter fit; drives the refit schedule.
    """

    X: np.ndarray
    y: np.ndarray
    hyper: KernelHyper
    mean_offset: float | None = None
    inserts_since_fit: int = 0
    refit_every: int = REFIT_EVERY
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        d = self.hyper.dim
        X = np.asarray(self.X, dtype=float).reshape(-1, d).copy()
        y = np.asarray(self.y, dtype=float).reshape(-1).copy()
        if X.shape[0] != y.size:
            raise ValueError("X and y lengths differ")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.mean_offset is None:
            object.__setattr__(self, "mean_offset", default_mean_offset(y))

    @classmethod
    def empty(cls, dim: int, hyper: KernelHyper | None = None, **kw) -> "GaussianProcess":
        hyper = hyper or KernelHyper(1.0, np.ones(dim))
        return cls(np.empty((0, dim)), np.empty(0), hyper, **kw)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.hyper.dim

    def with_hyper(self, hyper: KernelHyper) -> "GaussianProcess":
        return replace(self, hyper=hyper, inserts_since_fit=0, _cache={})

    def _factor(self):
        # (L, alpha) for the training set, computed once per instance.
        if "factor" not in self._cache:
            K = kernel_matrix(self.X, self.X, self.hyper)
            K[np.diag_indices_from(K)] += self.hyper.noise_variance
            L = stable_cholesky(K, scale=self.hyper.signal_variance)
            alpha = la.cho_solve((L, True), self.y - self.mean_offset, check_finite=False)
            self._cache["factor"] = (L, alpha)
        return self._cache["factor"]

    def contains(self, x, tol: float = DUPLICATE_TOL) -> int | None:
        """Index of a training row equal to ``x`` within ``tol``, else None."""
        if self.n == 0:
            return None
        x = _as_point(x, self.dim)
        hit = np.flatnonzero(np.all(np.abs(self.X - x) <= tol, axis=1))
        return int(hit[0]) if hit.size else None


def add_point(gp: GaussianProcess, x, log_p: float, refit: bool = True) -> GaussianProcess:
    """Return a GP that also contains ``(x, log_p)``.

    A duplicate input leaves the GP unchanged (the same object is returned)
    and issues a :class:`DuplicatePointWarning`. Hyperparameters are refit
    every ``gp.refit_every`` insertions when ``refit`` is true.
    """
    x = _as_point(x, gp.dim)
    if not np.isfinite(log_p):
        raise ValueError("log_p must be finite, got %r" % (log_p,))
    if gp.contains(x) is not None:
        warnings.warn("duplicate input %s skipped" % (x,), DuplicatePointWarning, stacklevel=2)
        return gp
    X = np.vstack([gp.X, x[None, :]])
    y = np.append(gp.y, float(log_p))
    new = GaussianProcess(X, y, gp.hyper, None, gp.inserts_since_fit + 1, gp.refit_every)
    if refit and new.n >= 2 and new.inserts_since_fit >= gp.refit_every:
        new = new.with_hyper(fit_hyperparameters(new, init=gp.hyper))
    return new


# ---------------------------------------------------------------------------
# Hyperparameter fitting
# ---------------------------------------------------------------------------


def _pack(hyper: KernelHyper) -> np.ndarray:
    return np.log(np.r_[hyper.signal_variance, hyper.lengthscales, hyper.noise_variance])


def _unpack(theta: np.ndarray) -> KernelHyper:
    e = np.exp(theta)
    return KernelHyper(e[0], e[1:-1], e[-1])


def _nlml_and_grad(theta, X, r, sqdist):
    sf2 = np.exp(theta[0])
    ls = np.exp(theta[1:-1])
    sn2 = np.exp(theta[-1])
    n = r.size
    Kf = sf2 * np.exp(-0.5 * np.tensordot(sqdist, 1.0 / ls**2, axes=([2], [0])))
    K = Kf + sn2 * np.eye(n)
    try:
        L = la.cholesky(K, lower=True, check_finite=False)
    except la.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = la.cho_solve((L, True), r, check_finite=False)
    nlml = 0.5 * r @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * np.log(2 * np.pi)
    Kinv = la.cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    grad[0] = -0.5 * np.sum(W * Kf)
    for j in range(ls.size):
        grad[1 + j] = -0.5 * np.sum(W * Kf * sqdist[:, :, j] / ls[j] ** 2)
    grad[-1] = -0.5 * sn2 * np.trace(W)
    if not np.isfinite(nlml):
        return 1e25, np.zeros_like(theta)
    return nlml, grad


def log_marginal_likelihood(gp: GaussianProcess, hyper: KernelHyper | None = None) -> float:
    """Log marginal likelihood of the training data under ``hyper``."""
    hyper = hyper or gp.hyper
    X, r = gp.X, gp.y - gp.mean_offset
    sqdist = (X[:, None, :] - X[None, :, :]) ** 2
    val, _ = _nlml_and_grad(_pack(hyper), X, r, sqdist)
    return -val


def _fit_bounds(X: np.ndarray, r: np.ndarray) -> list[tuple[float, float]]:
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    scale = max(float(np.mean(r**2)), 1.0)
    b = [(np.log(1e-6 * scale), np.log(1e4 * scale))]
    b += [(np.log(1e-3 * s), np.log(LENGTHSCALE_MAX_SPAN * s)) for s in span]
    b += [(np.log(NOISE_FLOOR), np.log(max(1e-6 * scale, 1e-4)))]
    return b


def fit_hyperparameters(
    gp: GaussianProcess,
    init: KernelHyper | None = None,
    restarts: int = FIT_RESTARTS,
    seed: int | None = None,
    max_points: int = FIT_MAX_POINTS,
) -> KernelHyper:
    """Maximize the log marginal likelihood over kernel hyperparameters.

    Multi-start L-BFGS-B in log space. The first start is ``init`` (or the
    GP's current hyperparameters), the remaining ones are drawn uniformly
    inside the search box. Deterministic: the RNG is seeded from ``seed``
    or, when omitted, from the training-set size. When the training set is
    larger than ``max_points``, a random subset of that size (always
    including the best point) is used.

    Returns the best hyperparameters found; never worse than the start.
    """
    if gp.n < 2:
        raise ValueError("need at least 2 training points to fit hyperparameters")
    rng = np.random.default_rng(gp.n if seed is None else seed)
    X, y = gp.X, gp.y
    if gp.n > max_points:
        best = int(np.argmax(y))
        idx = rng.choice(gp.n, size=max_points, replace=False)
        if best not in idx:
            idx[0] = best
        X, y = X[idx], y[idx]
    r = y - gp.mean_offset
    sqdist = (X[:, None, :] - X[None, :, :]) ** 2
    bounds = _fit_bounds(X, r)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    theta0 = np.clip(_pack(init or gp.hyper), lo, hi)
    best_theta = theta0
    best_val, _ = _nlml_and_grad(theta0, X, r, sqdist)
    any_converged = False
    starts = [theta0] + [rng.uniform(lo, hi) for _ in range(max(restarts - 1, 0))]
    for t0 in starts:
        res = minimize(
            _nlml_and_grad, t0, args=(X, r, sqdist), jac=True,
            method="L-BFGS-B", bounds=bounds, options={"maxiter": 200},
        )
        any_converged |= bool(res.success)
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if not any_converged:
        warnings.warn("hyperparameter optimization did not converge", FitWarning, stacklevel=2)
    return _unpack(best_theta)


def initial_hyper(bounds: np.ndarray, y_scale: float = 1.0) -> KernelHyper:
    """Starting hyperparameters derived from a search box."""
    bounds = np.asarray(bounds, dtype=float)
    span = bounds[:, 1] - bounds[:, 0]
    return KernelHyper(max(y_scale, 1.0), 0.2 * span, NOISE_FLOOR)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def predict(gp: GaussianProcess, Xq, full_cov: bool = False):
    """Posterior mean and variance (or covariance) of the latent log-density.

    Returns ``(mean, var)`` with ``var`` clipped at zero, or ``(mean, cov)``
    when ``full_cov`` is true.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != gp.dim:
        raise ValueError("dimension mismatch")
    m0 = gp.mean_offset
    if gp.n == 0:
        mean = np.full(Xq.shape[0], m0)
        if full_cov:
            return mean, kernel_matrix(Xq, Xq, gp.hyper)
        return mean, np.full(Xq.shape[0], gp.hyper.signal_variance)
    L, alpha = gp._factor()
    Ks = kernel_matrix(gp.X, Xq, gp.hyper)
    mean = m0 + Ks.T @ alpha
    V = la.solve_triangular(L, Ks, lower=True, check_finite=False)
    if full_cov:
        return mean, kernel_matrix(Xq, Xq, gp.hyper) - V.T @ V
    var = gp.hyper.signal_variance - np.einsum("ij,ij->j", V, V)
    return mean, np.maximum(var, 0.0)


def predict_joint(gp: GaussianProcess, x, x_star) -> JointPrediction:
    """Joint posterior of ``(ln p(x), ln p(x*))``.

    The 2x2 covariance is projected onto the PSD cone to remove round-off.
    """
    x = _as_point(x, gp.dim)
    x_star = _as_point(x_star, gp.dim)
    mean, cov = predict(gp, np.vstack([x, x_star]), full_cov=True)
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    if w[0] < 0:
        cov = (V * np.maximum(w, 0.0)) @ V.T
    return JointPrediction(
        float(mean[0]), float(mean[1]),
        float(max(cov[0, 0], 0.0)), float(max(cov[1, 1], 0.0)), float(cov[0, 1]),
    )


def local_subset(gp: GaussianProcess, x, x_star, k: int) -> GaussianProcess:
    """Sub-GP over the ``k`` nearest training points to each of ``x`` and ``x*``.

    Distances are Euclidean after scaling each coordinate by its lengthscale.
    Hyperparameters and the prior mean are inherited from ``gp``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if gp.n <= k:
        return gp
    x = _as_point(x, gp.dim)
    x_star = _as_point(x_star, gp.dim)
    Z = gp.X / gp.hyper.lengthscales
    idx = set()
    for q in (x, x_star):
        d2 = (((Z - q / gp.hyper.lengthscales)) ** 2).sum(1)
        idx.update(np.argpartition(d2, k - 1)[:k].tolist())
    idx = np.sort(np.fromiter(idx, dtype=int))
    return GaussianProcess(
        gp.X[idx], gp.y[idx], gp.hyper, gp.mean_offset, gp.inserts_since_fit, gp.refit_every
    )


def refit(gp: GaussianProcess) -> GaussianProcess:
    """Refit hyperparameters now (used at phase boundaries)."""
    if gp.n < 2:
        return gp
    return gp.with_hyper(fit_hyperparameters(gp))
