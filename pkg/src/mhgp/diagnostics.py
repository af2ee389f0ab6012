"""Chain comparison and instrumentation.

The energy statistic uses the V-statistic convention: pairwise means run
over all ordered pairs, self-pairs included. With that convention
duplicating both samples leaves the statistic unchanged, and small-sample
values differ from the U-statistic variant.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "EnergyTestResult", "energy_distance", "permutation_test", "subsample",
    "evaluations_per_window", "chain_summary", "first_passage", "decision_agreement",
]


@dataclass(frozen=True)
class EnergyTestResult:
    statistic: float
    p_value: float
    n_permutations: int
    seed: int | None

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "EnergyTestResult":
        return cls(**json.loads(text))


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def energy_distance(X, Y) -> float:
    """``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` with V-statistic pair means."""
    X, Y = _as_samples(X), _as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("dimension mismatch: %d vs %d" % (X.shape[1], Y.shape[1]))
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("both samples must be non-empty")
    # Both orders of the cross term and the sum b + c are commutative in
    # floating point, so swapping X and Y gives a bit-identical result.
    a = cdist(X, Y).mean() + cdist(Y, X).mean()
    b = cdist(X, X).mean()
    c = cdist(Y, Y).mean()
    return float(a - (b + c))


def permutation_test(X, Y, n_permutations: int = 999, seed: int | None = 0) -> EnergyTestResult:
    """Two-sample energy test.

    The statistic is ``nm/(n+m) * energy_distance``. The p-value counts
    permuted statistics at least as large as the observed one, plus one,
    over ``n_permutations + 1``.
    """
    if n_permutations < 99:
        raise ValueError("n_permutations must be >= 99")
    X, Y = _as_samples(X), _as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("dimension mismatch")
    n, m = len(X), len(Y)
    N = n + m
    Z = np.vstack([X, Y])
    D = cdist(Z, Z)
    row = D.sum(1)
    total = row.sum()
    factor = n * m / N

    def stats(masks):
        # masks: (N, B) indicators of the first group; pair sums via D @ masks
        sxx = np.einsum("ij,ij->j", masks, D @ masks)
        syy = total - 2.0 * row @ masks + sxx
        sxy = 0.5 * (total - sxx - syy)
        return factor * (2.0 * sxy / (n * m) - sxx / n**2 - syy / m**2)

    observed = factor * energy_distance(X, Y)
    rng = np.random.default_rng(seed)
    # Exact ties with the observed value (e.g. identical samples) must count.
    tol = 1e-9 * max(abs(observed), 1.0)
    hits = 0
    batch = 256
    for start in range(0, n_permutations, batch):
        B = min(batch, n_permutations - start)
        masks = np.zeros((N, B))
        for j in range(B):
            masks[rng.permutation(N)[:n], j] = 1.0
        hits += int(np.sum(stats(masks) >= observed - tol))
    observed = max(observed, 0.0)
    return EnergyTestResult(observed, (1 + hits) / (1 + n_permutations), n_permutations, seed)


def subsample(chain, n: int, burn_in: int = 0, seed: int | None = 0) -> np.ndarray:
    """Draw ``n`` post-burn-in rows without replacement."""
    samples = getattr(chain, "samples", chain)
    samples = np.asarray(samples)
    pool = samples[burn_in:]
    if n > len(pool):
        raise ValueError("requested %d rows but only %d available after burn-in" % (n, len(pool)))
    rng = np.random.default_rng(seed)
    return pool[rng.choice(len(pool), size=n, replace=False)]


def evaluations_per_window(chain, window: int) -> np.ndarray:
    """Number of sampling iterations with a true evaluation, per window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    ev = np.asarray(getattr(chain, "evaluated", chain), dtype=int)
    n_win = -(-ev.size // window)
    return np.add.reduceat(ev, np.arange(0, ev.size, window)) if n_win else np.zeros(0, int)


def chain_summary(chain, burn_in: int = 0) -> dict:
    if not 0 <= burn_in < len(chain.samples):
        raise ValueError("burn_in must be in [0, chain length)")
    s = chain.samples[burn_in:]
    return {
        "iterations": int(len(chain.samples)),
        "burn_in": int(burn_in),
        "mean": s.mean(0).tolist(),
        "std": s.std(0).tolist(),
        "acceptance_rate": float(np.mean(chain.accepted[burn_in:])),
        "eval_count_total": int(chain.eval_count_total),
        "phase_counts": {k: int(v) for k, v in chain.phase_counts.items()},
    }


def first_passage(log_density, level: float) -> int | None:
    """Number of evaluations until the log-density first reaches ``level``.

    ``log_density`` is the ordered sequence of evaluated values; the result
    is 1-based, or None if the level is never reached.
    """
    hit = np.flatnonzero(np.asarray(log_density) >= level)
    return int(hit[0]) + 1 if hit.size else None


def decision_agreement(chain, log_density, rng) -> float:
    """Fraction of iterations whose accept/reject matches exact Metropolis.

    Replays the sampling stream ``rng`` (one uniform, then ``d`` normals per
    iteration) from ``chain.x_start`` with ``chain.proposal`` and recomputes
    each decision with the true ``log_density``, which must return ``-inf``
    outside the support. Calls to ``log_density``
    here are not part of any sampler's evaluation budget.
    """
    x = np.asarray(chain.x_start, dtype=float)
    lp = log_density(x)
    agree = 0
    for i in range(len(chain.samples)):
        u = rng.uniform()
        x_star = x + chain.proposal.step(rng.standard_normal(x.size))
        lp_star = log_density(x_star)
        exact = u < min(1.0, np.exp(lp_star - lp))
        agree += exact == bool(chain.accepted[i])
        if chain.accepted[i]:
            x, lp = chain.samples[i], log_density(chain.samples[i])
    return agree / len(chain.samples)
