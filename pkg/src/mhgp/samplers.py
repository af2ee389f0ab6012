"""MHGP, plain random-walk Metropolis and DRAM samplers.

RNG stream layout
-----------------
All samplers take a ``numpy.random.Generator``. :func:`phase_rngs` splits one
integer seed into three independent streams via ``SeedSequence.spawn``:
index 0 drives Bayesian optimization, 1 the refinement walk and 2 the
sampling iterations. Within the sampling stream every iteration draws the
uniform ``u`` first and then the ``d`` standard normals of the proposal, in
both :func:`mhgp_run` and :func:`mh_run`; DRAM draws its second-stage
normals only after a first-stage rejection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bayes_opt import BoConfig, run_bayes_opt
from .gp import (GaussianProcess, JointPrediction, add_point, local_subset, predict_joint,
                 refit)
from .laplace import (DEFAULT_SCALE, ProposalSpec, RefineConfig, build_proposal,
                      default_iso_sigma, refine_random_walk, scale_covariance)

logger = logging.getLogger(__name__)

__all__ = [
    "Chain", "MhgpConfig", "DramConfig", "TargetValue", "phase_rngs",
    "acceptance_ratio", "uncertainty_ratio", "get_target_value",
    "mhgp_run", "mh_run", "dram_run",
]

PHASES = ("bo", "refine", "sampling")


def phase_rngs(seed) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for the BO, refinement and sampling phases."""
    ss = np.random.SeedSequence(seed)
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


@dataclass
class Chain:
    """Sampler output.

    ``samples[i]`` is the state after iteration ``i``. ``evaluated[i]`` is
    true when iteration ``i`` triggered at least one true target evaluation.
    """

    samples: np.ndarray
    accepted: np.ndarray
    evaluated: np.ndarray
    eval_count_total: int
    phase_counts: dict = field(default_factory=dict)
    log_density: np.ndarray | None = None
    x_start: np.ndarray | None = None
    proposal: ProposalSpec | None = None
    gp: GaussianProcess | None = None
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if len(self) else 0.0


@dataclass
class MhgpConfig:
    iterations: int
    bo: BoConfig
    x0: np.ndarray
    threshold: float = 0.1
    local_k: int = 50
    scale: float = DEFAULT_SCALE
    refine: RefineConfig = field(default_factory=RefineConfig)
    proposal: ProposalSpec | None = None
    seed: int = 0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.local_k < 1:
            raise ValueError("local_k must be >= 1")


def acceptance_ratio(jp: JointPrediction) -> float:
    """Mean of the log-normal ratio ``p(x*) / p(x)`` under the joint GP posterior."""
    vals = (jp.mu, jp.mu_star, jp.var_xx, jp.var_ss, jp.cov_xs)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError("non-finite joint prediction: %r" % (jp,))
    return float(np.exp(jp.mu_star - jp.mu + (jp.var_xx + jp.var_ss - 2.0 * jp.cov_xs) / 2.0))


def uncertainty_ratio(jp: JointPrediction) -> float:
    """Coefficient of variation ``sqrt(exp(s2) - 1)`` of the log-normal ratio."""
    s2 = jp.var_xx + jp.var_ss - 2.0 * jp.cov_xs
    if s2 < -1e-10:
        raise ValueError("negative ratio variance %g" % s2)
    if s2 > 700.0:
        return np.inf
    return float(np.sqrt(np.expm1(max(s2, 0.0))))


@dataclass
class TargetValue:
    """Result of one uncertainty-gated lookup.

    ``jp`` holds exact values (with zero variance and covariance) for any
    point that is known exactly. ``gp`` is the surrogate after insertions.
    """

    jp: JointPrediction
    gp: GaussianProcess
    evaluated_x: bool = False
    evaluated_star: bool = False

    @property
    def n_evaluations(self) -> int:
        return int(self.evaluated_x) + int(self.evaluated_star)


def _known(jp: JointPrediction, which: str, value: float) -> JointPrediction:
    if which == "x":
        return JointPrediction(value, jp.mu_star, 0.0, jp.var_ss, 0.0)
    return JointPrediction(jp.mu, value, jp.var_xx, 0.0, 0.0)


def _evaluate(target, x) -> float:
    value = target(x)
    if not np.isfinite(value):
        raise ValueError("target is not finite at in-bounds point %s" % (x,))
    return value


def get_target_value(gp, target, x, x_star, x_was_evaluated: bool, cfg,
                     x_value: float | None = None) -> TargetValue:
    """Predict ``ln p(x*)`` with a local GP, evaluating the target when unsure.

    ``x_value`` is the cached log-density of the current point: exact when
    ``x_was_evaluated``, otherwise the prediction it was accepted with. When
    omitted the fresh local-GP mean is used.
    """
    jp = predict_joint(local_subset(gp, x, x_star, cfg.local_k), x, x_star)
    if x_was_evaluated:
        if x_value is None:
            raise ValueError("an evaluated current point needs its value")
        jp = _known(jp, "x", x_value)
    elif x_value is not None:
        jp = JointPrediction(x_value, jp.mu_star, jp.var_xx, jp.var_ss, jp.cov_xs)

    if uncertainty_ratio(jp) <= cfg.threshold:
        return TargetValue(jp, gp)

    if x_was_evaluated:
        y_star = _evaluate(target, x_star)
        gp = add_point(gp, x_star, y_star)
        return TargetValue(_known(jp, "star", y_star), gp, evaluated_star=True)

    y = _evaluate(target, x)
    gp = add_point(gp, x, y)
    fresh = predict_joint(local_subset(gp, x, x_star, cfg.local_k), x, x_star)
    jp = _known(fresh, "x", y)
    if uncertainty_ratio(jp) <= cfg.threshold:
        return TargetValue(jp, gp, evaluated_x=True)
    y_star = _evaluate(target, x_star)
    gp = add_point(gp, x_star, y_star)
    return TargetValue(_known(jp, "star", y_star), gp, evaluated_x=True, evaluated_star=True)


def mhgp_run(target, cfg: MhgpConfig, rng=None) -> Chain:
    """Surrogate-accelerated Metropolis-Hastings.

    1. Bayesian optimization from ``cfg.x0``.
    2. Isotropic random walk that keeps adding true evaluations to the GP.
    3. Laplace proposal at the best point (unless ``cfg.proposal`` is given).
    4. ``cfg.iterations`` Metropolis steps with uncertainty-gated evaluation.

    ``rng`` may be a seed or a generator; a generator is split into the three
    phase streams with ``spawn``.
    """
    if rng is None:
        rng = cfg.seed
    if isinstance(rng, np.random.Generator):
        rng_bo, rng_ref, rng_mc = rng.spawn(3)
    else:
        rng_bo, rng_ref, rng_mc = phase_rngs(rng)
    counts = {}
    refine_cfg = cfg.refine
    if refine_cfg.iso_sigma is None:
        refine_cfg = replace(refine_cfg, iso_sigma=default_iso_sigma(cfg.bo.bounds))

    start = target.eval_count
    target.phase, target.iteration = "bo", None
    bo = run_bayes_opt(target, cfg.x0, cfg.bo, rng_bo)
    counts["bo"] = target.eval_count - start
    gp = refit(bo.gp)

    start = target.eval_count
    target.phase = "refine"
    gp, x_best = refine_random_walk(gp, target, bo.x_best, refine_cfg, rng_ref,
                                    threshold=cfg.threshold, scale=cfg.scale,
                                    local_k=cfg.local_k, y0=bo.y_best)
    counts["refine"] = target.eval_count - start
    if counts["refine"]:
        gp = refit(gp)
    idx = gp.contains(x_best)
    y_best = float(gp.y[idx]) if idx is not None else bo.y_best

    proposal = cfg.proposal
    if proposal is None:
        proposal = build_proposal(gp, x_best, cfg.scale, refine_cfg.iso_sigma)

    start = target.eval_count
    target.phase = "sampling"
    N, d = cfg.iterations, x_best.size
    samples = np.empty((N, d))
    logp = np.empty(N)
    accepted = np.zeros(N, dtype=bool)
    evaluated = np.zeros(N, dtype=bool)
    x, value, x_known = x_best.copy(), y_best, True
    for i in range(N):
        target.iteration = i
        u = rng_mc.uniform()
        x_star = x + proposal.step(rng_mc.standard_normal(d))
        if target.in_bounds(x_star):
            tv = get_target_value(gp, target, x, x_star, x_known, cfg, x_value=value)
            gp = tv.gp
            evaluated[i] = tv.n_evaluations > 0
            if tv.evaluated_x:
                value, x_known = tv.jp.mu, True
            if u < min(1.0, acceptance_ratio(tv.jp)):
                x, value, x_known = x_star, tv.jp.mu_star, tv.evaluated_star
                accepted[i] = True
        samples[i] = x
        logp[i] = value
    counts["sampling"] = target.eval_count - start
    target.iteration = None

    return Chain(samples, accepted, evaluated, sum(counts.values()), counts, logp,
                 x_best, proposal, gp, {"bo_history": bo.history})


def mh_run(target, iterations: int, proposal: ProposalSpec, x0, rng) -> Chain:
    """Random-walk Metropolis with one target evaluation per iteration."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    start = target.eval_count
    lp = target(x)
    if not np.isfinite(lp):
        raise ValueError("target is not finite at the initial point")
    samples = np.empty((iterations, d))
    logp = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    for i in range(iterations):
        target.iteration = i
        u = rng.uniform()
        x_star = x + proposal.step(rng.standard_normal(d))
        lp_star = target(x_star)
        if u < min(1.0, np.exp(lp_star - lp)):
            x, lp = x_star, lp_star
            accepted[i] = True
        samples[i] = x
        logp[i] = lp
    target.iteration = None
    n = target.eval_count - start
    return Chain(samples, accepted, np.ones(iterations, dtype=bool), n, {"sampling": n},
                 logp, np.asarray(x0, dtype=float), proposal)


@dataclass
class DramConfig:
    iterations: int
    x0: np.ndarray
    initial_cov: np.ndarray
    adapt: bool = True
    adapt_start: int = 500
    adapt_interval: int = 100
    delayed_rejection: bool = True
    dr_scale: float = 0.2
    epsilon: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.initial_cov = np.atleast_2d(np.asarray(self.initial_cov, dtype=float))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def _dr_alpha(lp_x, lp_y1, lp_y2, x, y1, y2, prec) -> float:
    # Second-stage acceptance for symmetric Gaussian first-stage proposals.
    a1_fwd = min(1.0, np.exp(lp_y1 - lp_x))
    a1_rev = min(1.0, np.exp(lp_y1 - lp_y2))
    if a1_rev >= 1.0 or a1_fwd >= 1.0:
        return 0.0
    r1, r2 = y1 - x, y1 - y2
    log_q = -0.5 * (r2 @ prec @ r2) + 0.5 * (r1 @ prec @ r1)
    num = np.exp(lp_y2 - lp_x + log_q) * (1.0 - a1_rev)
    return float(min(1.0, num / (1.0 - a1_fwd)))


def dram_run(target, cfg: DramConfig, rng=None) -> Chain:
    """Delayed-rejection adaptive Metropolis (one DR stage).

    After ``adapt_start`` iterations, every ``adapt_interval`` iterations the
    proposal covariance becomes ``2.4^2/d * (cov(chain) + epsilon I)``. A
    rejected first-stage move is retried with the proposal standard
    deviation shrunk by ``dr_scale``.
    """
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(cfg.seed if rng is None else rng)
    x = cfg.x0.copy()
    d = x.size
    sd = 2.4**2 / d
    start = target.eval_count
    lp = target(x)
    if not np.isfinite(lp):
        raise ValueError("target is not finite at the initial point")
    cov = cfg.initial_cov.copy()
    L = np.linalg.cholesky(cov)
    prec = np.linalg.inv(cov)
    N = cfg.iterations
    samples = np.empty((N, d))
    logp = np.empty(N)
    accepted = np.zeros(N, dtype=bool)
    evaluated = np.ones(N, dtype=bool)
    n_stage2 = 0
    for i in range(N):
        target.iteration = i
        u = rng.uniform()
        y1 = x + L @ rng.standard_normal(d)
        lp1 = target(y1)
        if u < min(1.0, np.exp(lp1 - lp)):
            x, lp = y1, lp1
            accepted[i] = True
        elif cfg.delayed_rejection:
            u2 = rng.uniform()
            y2 = x + cfg.dr_scale * (L @ rng.standard_normal(d))
            lp2 = target(y2)
            if np.isfinite(lp2) and u2 < _dr_alpha(lp, lp1, lp2, x, y1, y2, prec):
                x, lp = y2, lp2
                accepted[i] = True
                n_stage2 += 1
        samples[i] = x
        logp[i] = lp
        done = i + 1
        if cfg.adapt and done >= cfg.adapt_start and done % cfg.adapt_interval == 0:
            emp = np.cov(samples[:done].T).reshape(d, d)
            new = sd * (emp + cfg.epsilon * np.eye(d))
            try:
                L = np.linalg.cholesky(new)
            except np.linalg.LinAlgError:
                continue
            cov, prec = new, np.linalg.inv(new)
    target.iteration = None
    n = target.eval_count - start
    return Chain(samples, accepted, evaluated, n, {"sampling": n}, logp, cfg.x0.copy(),
                 scale_covariance(cfg.initial_cov, 1.0), extras={"stage2_accepts": n_stage2})
