"""Benchmark log-densities with evaluation counting.

Contains the twisted-Gaussian "banana" distribution, a posterior over the
parameters of a two-step A -> B -> C reaction observed at two temperatures,
and plain Gaussian targets for testing the samplers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GAS_CONSTANT = 8.314  # J / (mol K)
T_REF = 600.0
BATCH_TEMPERATURES = (557.0, 645.0)
N_OBS = 10


@dataclass
class TargetModel:
    """A log-density oracle that counts its own evaluations.

    ``bounds`` is the support (prior box); points outside it have
    log-density ``-inf``. Every call, in or out of bounds, increments
    ``eval_count``. When ``record`` is set, each call is appended to
    ``records`` tagged with the current ``phase``.
    """

    log_density: Callable[[np.ndarray], float]
    dim: int
    bounds: np.ndarray | None = None
    label: str = ""
    record: bool = False
    eval_count: int = 0
    phase: str = ""
    iteration: int | None = None
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = np.tile([-np.inf, np.inf], (self.dim, 1))
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(self.dim, 2)
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ValueError("bounds must satisfy low < high")

    def in_bounds(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.bounds[:, 0]) and np.all(x <= self.bounds[:, 1]))

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        self.eval_count += 1
        value = float(self.log_density(x)) if self.in_bounds(x) else -np.inf
        if self.record:
            self.records.append({
                "phase": self.phase,
                "iteration": self.iteration,
                "point": [float(v) for v in x],
                "log_density": value,
            })
        return value


# ---------------------------------------------------------------------------
# Banana
# ---------------------------------------------------------------------------

def banana_logpdf(x, b: float = 0.1) -> float:
    """Normalized log-density of the twisted Gaussian N(0, diag(100, 1))."""
    x1, x2 = float(x[0]), float(x[1])
    phi2 = x2 + b * x1 * x1 - 100.0 * b
    return -x1 * x1 / 200.0 - 0.5 * phi2 * phi2 - np.log(20.0 * np.pi)


def banana_target(b: float = 0.1, bounds=None, record: bool = False) -> TargetModel:
    return TargetModel(lambda x: banana_logpdf(x, b), 2, bounds, "banana", record)


def gaussian_target(mean, cov, bounds=None, record: bool = False) -> TargetModel:
    """Unnormalized multivariate normal log-density."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    prec = np.linalg.inv(np.atleast_2d(np.asarray(cov, dtype=float)))

    def logpdf(x):
        r = x - mean
        return -0.5 * float(r @ prec @ r)

    return TargetModel(logpdf, mean.size, bounds, "gaussian", record)


# ---------------------------------------------------------------------------
# A -> B -> C kinetics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KineticsParams:
    k1_ref: float = 1.0e-1
    E1: float = 8.0e4
    k2_ref: float = 5.0e-2
    E2: float = 1.0e5
    A0_batch1: float = 1.0
    A0_batch2: float = 1.0

    def __post_init__(self):
        if any(v <= 0 for v in self.as_array()):
            raise ValueError("kinetics parameters must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.k1_ref, self.E1, self.k2_ref, self.E2,
                         self.A0_batch1, self.A0_batch2])

    @classmethod
    def from_array(cls, a) -> "KineticsParams":
        return cls(*(float(v) for v in a))


@dataclass
class KineticsBatch:
    T: float
    times: np.ndarray
    obs: np.ndarray  # (len(times), 2): columns A, B


@dataclass
class KineticsDataset:
    batches: list[KineticsBatch]
    noise_sigma: float

    def __post_init__(self):
        for b in self.batches:
            if np.any(np.diff(b.times) <= 0):
                raise ValueError("observation times must be strictly increasing")
            if np.any(b.obs < 0):
                raise ValueError("concentrations must be non-negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["batch", "T", "time", "obs_A", "obs_B"])
            for i, b in enumerate(self.batches, start=1):
                for t, (a, bb) in zip(b.times, b.obs):
                    w.writerow([i, repr(float(b.T)), repr(float(t)), repr(float(a)), repr(float(bb))])

    @classmethod
    def from_csv(cls, path, noise_sigma: float) -> "KineticsDataset":
        rows: dict[int, list] = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"batch", "T", "time", "obs_A", "obs_B"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError("kinetics CSV missing columns: %s" % sorted(missing))
            for r in reader:
                rows.setdefault(int(r["batch"]), []).append(
                    (float(r["T"]), float(r["time"]), float(r["obs_A"]), float(r["obs_B"])))
        batches = []
        for k in sorted(rows):
            a = np.array(rows[k])
            batches.append(KineticsBatch(float(a[0, 0]), a[:, 1], a[:, 2:4]))
        return cls(batches, noise_sigma)


def arrhenius(k_ref: float, E: float, T: float) -> float:
    """Rate at temperature ``T`` given the rate at ``T_REF``."""
    if T == T_REF:
        return k_ref
    return k_ref * np.exp(-(E / GAS_CONSTANT) * (1.0 / T - 1.0 / T_REF))


def kinetics_rhs(state, k1: float, k2: float) -> np.ndarray:
    A, B = state
    return np.array([-k1 * A, k1 * A - k2 * B])


def rk4(rhs, y0, times, h_max: float, args=()) -> np.ndarray:
    """Classical fixed-step RK4 sampled at ``times`` (which start at or after 0)."""
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(times), y.size))
    t_prev = 0.0
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            n = int(np.ceil(dt / h_max - 1e-9))
            h = dt / n
            for _ in range(n):
                s1 = rhs(y, *args)
                s2 = rhs(y + 0.5 * h * s1, *args)
                s3 = rhs(y + 0.5 * h * s2, *args)
                s4 = rhs(y + h * s3, *args)
                y = y + h / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        out[i] = y
        t_prev = t
    return out


def _rk4_step_matrix(k1: float, k2: float, h: float) -> np.ndarray:
    # The system is linear, dy/dt = J y, so one RK4 step is the degree-4
    # Taylor polynomial of exp(hJ).
    J = np.array([[-k1, 0.0], [k1, -k2]])
    hJ = h * J
    M = np.eye(2)
    term = np.eye(2)
    for p in range(1, 5):
        term = term @ hJ / p
        M = M + term
    return M


def solve_rates(k1: float, k2: float, A0: float, times) -> np.ndarray:
    """RK4 solution of the A -> B -> C system for fixed rates.

    Step size is ``min(diff(times)) / 20``; each observation interval is
    split into an integer number of equal steps no longer than that. Because
    the system is linear, each interval applies the RK4 step matrix ``n``
    times instead of looping over :func:`kinetics_rhs`; the result is the
    same RK4 solution up to round-off.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, 2))
    y = np.array([A0, 0.0])
    t_prev = 0.0
    gaps = np.diff(np.r_[0.0, times])
    positive = gaps[gaps > 0]
    h_max = positive.min() / 20.0 if positive.size else 1.0
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            n = int(np.ceil(dt / h_max - 1e-9))
            M = _rk4_step_matrix(k1, k2, dt / n)
            y = np.linalg.matrix_power(M, n) @ y
        out[i] = y
        t_prev = t
    return out


def kinetics_solve(params: KineticsParams, T: float, times, batch: int = 1) -> np.ndarray:
    """Concentrations of A and B at ``times`` for one batch at temperature ``T``."""
    k1 = arrhenius(params.k1_ref, params.E1, T)
    k2 = arrhenius(params.k2_ref, params.E2, T)
    A0 = params.A0_batch1 if batch == 1 else params.A0_batch2
    return solve_rates(k1, k2, A0, times)


def closed_form_solution(k1: float, k2: float, A0: float, t):
    """Analytic A(t), B(t); uses the k1 == k2 limit when the rates nearly coincide."""
    t = np.asarray(t, dtype=float)
    A = A0 * np.exp(-k1 * t)
    if abs(k2 - k1) < 1e-6 * max(k1, k2):
        k = 0.5 * (k1 + k2)
        B = A0 * k * t * np.exp(-k * t)
    else:
        B = A0 * k1 / (k2 - k1) * (np.exp(-k1 * t) - np.exp(-k2 * t))
    return A, B


def kinetics_loglik(params, data: KineticsDataset) -> float:
    """Gaussian log-likelihood of the observations, constants dropped.

    ``params`` may also be a length-6 array; non-positive entries give ``-inf``.
    """
    if not isinstance(params, KineticsParams):
        a = np.asarray(params, dtype=float)
        if a.shape != (6,) or np.any(a <= 0):
            return -np.inf
        params = KineticsParams.from_array(a)
    total = 0.0
    for i, b in enumerate(data.batches, start=1):
        model = kinetics_solve(params, b.T, b.times, batch=i)
        total += float(np.sum((b.obs - model) ** 2))
    return -total / (2.0 * data.noise_sigma**2)


def _decay_end_time(params: KineticsParams, T: float, batch: int) -> float:
    # Time for A to fall to 10% of its initial value.
    return np.log(10.0) / arrhenius(params.k1_ref, params.E1, T)


def generate_synthetic_data(
    true_params: KineticsParams | None = None,
    noise_sigma: float = 0.01,
    seed: int | None = 0,
    temperatures=BATCH_TEMPERATURES,
    n_obs: int = N_OBS,
) -> KineticsDataset:
    """Noisy observations of both species at two temperatures.

    Each batch has ``n_obs`` equispaced times from 0 to the time at which A
    has decayed to about 10% of its start value.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    p = true_params or KineticsParams()
    rng = np.random.default_rng(seed)
    batches = []
    for i, T in enumerate(temperatures, start=1):
        t_end = _decay_end_time(p, T, i)
        times = np.linspace(0.0, t_end, n_obs)
        clean = kinetics_solve(p, T, times, batch=i)
        noisy = clean + noise_sigma * rng.standard_normal(clean.shape) if noise_sigma > 0 else clean
        batches.append(KineticsBatch(T, times, np.maximum(noisy, 0.0)))
    # Noise-free data still needs a positive sigma for the likelihood scale.
    return KineticsDataset(batches, noise_sigma if noise_sigma > 0 else 0.01)


def kinetics_target(
    data: KineticsDataset | None = None,
    reference: KineticsParams | None = None,
    rel_bounds=(0.5, 1.5),
    record: bool = False,
) -> TargetModel:
    """Posterior over kinetics parameters in units relative to ``reference``.

    Coordinates are ``params / reference``, so the reference point sits at
    all ones. A uniform prior on the box ``rel_bounds`` makes the posterior
    proportional to the likelihood inside it.
    """
    data = data if data is not None else generate_synthetic_data()
    ref = (reference or KineticsParams()).as_array()

    def logpdf(x):
        return kinetics_loglik(KineticsParams.from_array(x * ref), data)

    bounds = np.tile(rel_bounds, (6, 1))
    target = TargetModel(logpdf, 6, bounds, "kinetics", record)
    target.reference = ref
    target.data = data
    return target
