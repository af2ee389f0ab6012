import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mhgp.diagnostics import (EnergyTestResult, chain_summary, decision_agreement,
                              energy_distance, evaluations_per_window, first_passage,
                              permutation_test, subsample)
from mhgp.laplace import scale_covariance
from mhgp.samplers import Chain, mh_run
from mhgp.targets import gaussian_target


def naive_energy(X, Y):
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    a = np.mean([[np.linalg.norm(x - y) for y in Y] for x in X])
    b = np.mean([[np.linalg.norm(x - z) for z in X] for x in X])
    c = np.mean([[np.linalg.norm(y - z) for z in Y] for y in Y])
    return 2 * a - b - c


def chain_from(samples, accepted=None, evaluated=None):
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    acc = np.zeros(n, bool) if accepted is None else np.asarray(accepted)
    ev = np.zeros(n, bool) if evaluated is None else np.asarray(evaluated)
    return Chain(samples, acc, ev, int(ev.sum()), {"sampling": int(ev.sum())})


samples_2d = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)),
                    elements=st.floats(-100, 100))


# energy_distance

def test_energy_examples():
    assert energy_distance([[0.0]], [[1.0]]) == 2.0
    assert energy_distance([0.0, 2.0], [1.0, 1.0]) == 1.0
    X = np.random.default_rng(0).normal(size=(20, 3))
    assert energy_distance(X, X[::-1]) == pytest.approx(0.0, abs=1e-12)


def test_energy_matches_naive(rng):
    X, Y = rng.normal(size=(7, 3)), rng.normal(size=(5, 3)) + 1
    assert energy_distance(X, Y) == pytest.approx(naive_energy(X, Y), abs=1e-12)


def test_energy_errors():
    with pytest.raises(ValueError):
        energy_distance(np.zeros((3, 2)), np.zeros((3, 3)))


@settings(max_examples=50, deadline=None)
@given(samples_2d, samples_2d)
def test_energy_properties(X, Y):
    e = energy_distance(X, Y)
    assert e >= -1e-12
    assert e == energy_distance(Y, X)
    shift = np.array([3.7, -12.1])
    assert abs(energy_distance(X + shift, Y + shift) - e) < 1e-10 * max(1.0, np.abs(X).max(), np.abs(Y).max())
    assert abs(energy_distance(np.vstack([X, X]), np.vstack([Y, Y])) - e) <= 1e-12 * max(1.0, abs(e)) * 100


# permutation_test

def test_permutation_identical():
    X = np.random.default_rng(1).normal(size=(50, 2))
    res = permutation_test(X, X.copy(), 999, seed=0)
    assert res.statistic == 0.0 and res.p_value == 1.0


def test_permutation_separated():
    rng = np.random.default_rng(2)
    res = permutation_test(rng.normal(size=200), rng.normal(10, 1, size=200), 999, seed=0)
    assert res.p_value == 1 / 1000


def test_permutation_statistic_scaling(rng):
    X, Y = rng.normal(size=(30, 2)), rng.normal(size=(20, 2))
    res = permutation_test(X, Y, 99, seed=0)
    assert res.statistic == pytest.approx(30 * 20 / 50 * energy_distance(X, Y), rel=1e-12)


def test_permutation_pvalue_definition(rng):
    X, Y = rng.normal(size=(15, 2)), rng.normal(size=(12, 2)) + 0.3
    res = permutation_test(X, Y, 199, seed=7)
    # replay the permutations by brute force
    Z = np.vstack([X, Y])
    g = np.random.default_rng(7)
    hits = 0
    for _ in range(199):
        p = g.permutation(27)
        hits += 15 * 12 / 27 * naive_energy(Z[p[:15]], Z[p[15:]]) >= res.statistic - 1e-9
    assert res.p_value == (1 + hits) / 200


def test_permutation_deterministic_and_bounds(rng):
    X, Y = rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
    a = permutation_test(X, Y, 199, seed=3)
    assert a == permutation_test(X, Y, 199, seed=3)
    assert 1 / 200 <= a.p_value <= 1.0


def test_permutation_minimum_count():
    with pytest.raises(ValueError):
        permutation_test(np.zeros((3, 1)), np.ones((3, 1)), 50)


def test_result_json_roundtrip():
    r = EnergyTestResult(1.25, 0.4, 999, 12)
    assert EnergyTestResult.from_json(r.to_json()) == r
    assert set(__import__("json").loads(r.to_json())) == {"statistic", "p_value", "n_permutations", "seed"}


@pytest.mark.slow
def test_permutation_calibration():
    passes = 0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        res = permutation_test(rng.normal(size=(200, 2)), rng.normal(size=(200, 2)), 999, seed=seed)
        passes += res.p_value > 0.01
    assert passes >= 95


# subsample

def test_subsample_full_is_permutation():
    ch = chain_from(np.arange(20.0).reshape(10, 2))
    sub = subsample(ch, 10, 0, seed=1)
    assert sorted(map(tuple, sub)) == sorted(map(tuple, ch.samples))


def test_subsample_deterministic_and_contained():
    ch = chain_from(np.random.default_rng(0).normal(size=(100, 2)))
    a, b = subsample(ch, 30, 20, seed=4), subsample(ch, 30, 20, seed=4)
    np.testing.assert_array_equal(a, b)
    rows = {tuple(r) for r in ch.samples[20:]}
    assert all(tuple(r) in rows for r in a)


def test_subsample_too_many():
    with pytest.raises(ValueError):
        subsample(chain_from(np.zeros((10, 1))), 9, 2)


# evaluations_per_window

def test_windows_all_false():
    np.testing.assert_array_equal(evaluations_per_window(np.zeros(10, bool), 3), [0, 0, 0, 0])


@given(st.lists(st.booleans(), min_size=1, max_size=200), st.integers(1, 50))
def test_windows_partition(flags, w):
    counts = evaluations_per_window(np.array(flags), w)
    assert counts.sum() == sum(flags)
    assert counts.size == -(-len(flags) // w)


def test_windows_invalid():
    with pytest.raises(ValueError):
        evaluations_per_window(np.ones(3, bool), 0)


# chain_summary

def test_summary_constant_chain():
    s = chain_summary(chain_from(np.ones((50, 2))))
    assert s["std"] == [0.0, 0.0] and s["acceptance_rate"] == 0.0


def test_summary_acceptance_definition():
    acc = np.array([True, False, True, True, False, False, True, False])
    s = chain_summary(chain_from(np.zeros((8, 1)), acc), burn_in=2)
    assert s["acceptance_rate"] == acc[2:].mean()
    with pytest.raises(ValueError):
        chain_summary(chain_from(np.zeros((8, 1))), burn_in=8)


def test_summary_mh_standard_normal():
    t = gaussian_target([0.0], [[1.0]])
    ch = mh_run(t, 10**5, scale_covariance([[2.4**2]], 1.0), [0.0], np.random.default_rng(1))
    s = chain_summary(ch)
    assert abs(s["mean"][0]) <= 0.05 and abs(s["std"][0] - 1.0) <= 0.1
    assert s["eval_count_total"] == 10**5 + 1


# first_passage and decision_agreement

def test_first_passage():
    assert first_passage([-10, -8, -5, -3], -6.2) == 3
    assert first_passage([-10, -8], -6.2) is None


def test_decision_agreement_exact_for_mh():
    t = gaussian_target([0.0, 0.0], np.eye(2))
    prop = scale_covariance(np.eye(2), 1.0)
    ch = mh_run(t, 500, prop, [1.0, 1.0], np.random.default_rng(9))
    assert decision_agreement(ch, t.log_density, np.random.default_rng(9)) == 1.0
