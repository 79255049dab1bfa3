import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daavm.sir import (ObsSeries, SirParams, bootstrap_pf, from_unconstrained, pf_run, read_cases, simulate_sir,
                       sir_exact_loglik, sir_freq_fit, sir_step, to_unconstrained, write_cases)


def test_beta_zero_no_infection(rng):
    state = (999, 1, 0)
    for _ in range(20):
        new = sir_step(state, SirParams(0.0, 0.5, 0.1), rng)
        assert new[0] == 999
        state = new


def test_gamma_zero_no_recovery(rng):
    state = (90, 10, 0)
    for _ in range(20):
        state = sir_step(state, SirParams(1.5, 0.0, 0.1), rng)
        assert state[2] == 0


def test_initial_infection_rate(rng):
    N, b, n = 100_000, 2.0, 100_000
    S = np.full(n, N - 1)
    I = np.ones(n, dtype=np.int64)
    S2, _, _ = sir_step((S, I, np.zeros(n, np.int64)), SirParams(b, 0.5, 0.1), rng, N)
    d = S - S2
    mu = b * (N - 1) / N
    assert abs(d.mean() - mu) < 3 * math.sqrt(mu / n)


@settings(max_examples=40, deadline=None)
@given(b=st.floats(0, 20), g=st.floats(0, 5), seed=st.integers(0, 2**32 - 1))
def test_population_conserved(b, g, seed):
    r = np.random.default_rng(seed)
    state = (48, 2, 0)
    for _ in range(10):
        state = sir_step(state, (b, g), r)
        assert sum(int(v) for v in state) == 50
        assert min(int(v) for v in state) >= 0


def test_untruncated_flag_raises():
    r = np.random.default_rng(0)
    with pytest.raises(FloatingPointError):
        for _ in range(50):
            sir_step((1, 9, 0), (50.0, 5.0), r, truncate=False)


def test_simulate_shapes(rng):
    obs, I = simulate_sir((2.0, 0.5, 0.1), 100_000, 52, rng, min_total=100)
    assert obs.T == 52 and I.shape == (52,) and obs.cases.sum() >= 100
    assert np.all(obs.cases <= I)


def test_pf_empty_series(rng):
    assert bootstrap_pf((2.0, 0.5, 0.1), ObsSeries(np.array([], dtype=int), 100), 10, rng) == 0.0


def test_pf_all_particles_fail(rng):
    # 50 cases in week one cannot come from at most a handful of infected
    obs = ObsSeries(np.array([50]), 1000)
    r = pf_run((0.1, 0.5, 0.5), obs, 50, rng)
    assert r.loglik == -math.inf and r.degenerate


def test_pf_unbiased_on_toy():
    obs = ObsSeries(np.array([1, 1]), 3)
    th = (1.5, 0.4, 0.6)
    exact = math.exp(sir_exact_loglik(th, obs))
    g = np.random.default_rng(1)
    L = np.exp([bootstrap_pf(th, obs, 5, g) for _ in range(20_000)])
    assert abs(L.mean() - exact) < 3 * L.std(ddof=1) / math.sqrt(L.size)


def test_exact_loglik_sums_to_one():
    # total probability over every observable series of length 2
    th = (1.5, 0.4, 0.6)
    tot = 0.0
    for a in range(4):
        for b in range(4):
            v = sir_exact_loglik(th, ObsSeries(np.array([a, b]), 3))
            tot += math.exp(v) if v > -math.inf else 0.0
    assert tot == pytest.approx(1.0, abs=1e-12)


def test_pf_variance_shrinks_with_particles():
    obs, _ = simulate_sir((2.0, 0.5, 0.9), 2000, 20, np.random.default_rng(3), min_total=50)
    g = np.random.default_rng(4)
    v100 = np.var([bootstrap_pf((2.0, 0.5, 0.9), obs, 100, g) for _ in range(40)])
    v1000 = np.var([bootstrap_pf((2.0, 0.5, 0.9), obs, 1000, g) for _ in range(40)])
    assert v1000 < v100


def test_unconstrained_round_trip():
    th = np.array([2.0, 0.5, 0.1])
    assert np.allclose(from_unconstrained(to_unconstrained(th)), th)


def test_params_validation():
    with pytest.raises(ValueError):
        SirParams(1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        ObsSeries(np.array([5, -1]), 10)


def test_cases_round_trip(tmp_path, rng):
    obs, _ = simulate_sir((2.0, 0.5, 0.1), 10_000, 12, rng)
    write_cases(tmp_path / "c.csv", obs)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "week,cases"
    back = read_cases(tmp_path / "c.csv", 10_000)
    assert np.array_equal(back.cases, obs.cases)


@pytest.mark.slow
def test_freq_fit_recovers_truth():
    truth = np.array([2.0, 0.5, 0.1])
    obs, _ = simulate_sir(truth, 100_000, 52, np.random.default_rng(2024), min_total=100)
    fit = sir_freq_fit(obs, 500, np.random.default_rng(7))
    se = np.sqrt(np.diag(fit.cov))
    assert np.all(np.abs(fit.theta - truth) < 3 * se + 1e-12)
    assert np.allclose(fit.cov, fit.cov.T) and np.linalg.eigvalsh(fit.cov).min() > 0


def test_mean_field_start_recovers_deterministic_curve():
    from daavm.sir import _mean_field_path, mean_field_start
    N, truth = 100_000, (1.8, 0.6, 0.2)
    cases = np.rint(truth[2] * _mean_field_path(truth[0], truth[1], 3.0, N, 40)).astype(int)
    est = mean_field_start(ObsSeries(cases, N))
    assert np.allclose(est, truth, rtol=0.05)
