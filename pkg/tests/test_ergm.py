import math

import numpy as np
import pytest
from scipy.special import expit, logit

from daavm.ergm import (DECAY, ErgmModel, MoveTheta0Error, Network, SeparationError, ergm_change_stats,
                        ergm_gibbs_cycle, ergm_log_pl, ergm_mcmle, ergm_mple, ergm_stats, faux_mesa_like,
                        read_network, write_network)

from ergm_oracle import brute_stats, graph_from_code


def test_empty_graph_zero():
    assert np.all(ergm_stats(np.zeros((5, 5), int), [7] * 5) == 0)


def test_single_edge():
    A = np.zeros((4, 4), int)
    A[0, 1] = A[1, 0] = 1
    s = ergm_stats(A, [7, 7, 8, 9])
    assert np.allclose(s, [2, 1, 0, 0, 0, 0, 0, 2, 0])


def test_triangle():
    A = np.ones((3, 3), int) - np.eye(3, dtype=int)
    s = ergm_stats(A, [7, 7, 7])
    e = math.exp(DECAY)
    assert s[0] == 6 and s[1] == 3
    assert s[7] == pytest.approx(3 * e * (1 - (1 - 1 / e) ** 2))
    assert s[7] == pytest.approx(3.6635, abs=1e-4)
    assert s[8] == pytest.approx(3.0)


def test_stats_match_brute_force_random(rng):
    for _ in range(200):
        n = 6
        A = graph_from_code(int(rng.integers(2**15)), n)
        g = rng.integers(7, 13, size=n)
        assert np.allclose(ergm_stats(A, g), brute_stats(A, g), rtol=0, atol=1e-12)


def test_stats_node_permutation(rng):
    n = 20
    A = (rng.random((n, n)) < 0.2).astype(int)
    A = np.triu(A, 1)
    A = A + A.T
    g = rng.integers(7, 13, size=n)
    p = rng.permutation(n)
    assert np.allclose(ergm_stats(A[np.ix_(p, p)], g[p]), ergm_stats(A, g))


def test_change_stats_match_recompute(rng):
    for _ in range(300):
        n = 15
        A = np.triu((rng.random((n, n)) < rng.uniform(0.1, 0.6)).astype(np.int64), 1)
        A = A + A.T
        g = rng.integers(7, 13, size=n)
        i, j = rng.choice(n, 2, replace=False)
        plus, minus = A.copy(), A.copy()
        plus[i, j] = plus[j, i] = 1
        minus[i, j] = minus[j, i] = 0
        d = ergm_change_stats(A, g, i, j)
        ref = ergm_stats(plus, g) - ergm_stats(minus, g)
        # counts agree exactly; geometric weights up to float rounding of the full sums
        assert np.array_equal(d[:7], ref[:7])
        assert np.allclose(d[7:], ref[7:], rtol=0, atol=1e-12)


def test_gibbs_theta_zero_half_density():
    n = 30
    g = np.random.default_rng(1)
    grade = g.integers(7, 13, size=n)
    A = np.zeros((n, n), np.int64)
    dens = []
    for _ in range(200):
        A = ergm_gibbs_cycle(A, grade, np.zeros(9), g)
        dens.append(A[np.triu_indices(n, 1)].mean())
    assert abs(np.mean(dens) - 0.5) < 0.01


def test_gibbs_edge_only_erdos_renyi():
    n, t1 = 20, -0.6
    g = np.random.default_rng(2)
    grade = np.full(n, 7)
    theta = np.zeros(9)
    theta[0] = t1
    model = ErgmModel(grade)
    A = model.initial_state()
    freq = []
    for _ in range(10_000):
        A = model.run_cycles(A, theta, 1, g)
        freq.append(A[0, 1])
    p = expit(2 * t1)
    assert abs(np.mean(freq) - p) < 3 * math.sqrt(p * (1 - p) / len(freq))


def test_random_scan_runs(rng):
    m = ErgmModel(rng.integers(7, 13, size=10), random_scan=True)
    A = m.run_cycles(m.initial_state(), np.zeros(9), 3, rng)
    m.check_state(A)


def test_log_pl_theta_zero():
    n = 12
    g = np.random.default_rng(0)
    A = np.triu((g.random((n, n)) < 0.3).astype(int), 1)
    A = A + A.T
    assert ergm_log_pl(A, np.full(n, 7), np.zeros(9)) == pytest.approx(-math.comb(n, 2) * math.log(2))


def _er_graph(n, p, g):
    A = np.triu((g.random((n, n)) < p).astype(np.int64), 1)
    return A + A.T


def test_mple_stationary_and_edge_reduction():
    g = np.random.default_rng(4)
    n = 200
    grade = np.repeat(np.array([7, 8, 9, 10, 11, 12]), [40, 40, 40, 30, 30, 20])
    A = _er_graph(n, 0.05, g)
    th, H = ergm_mple(A, grade)
    eps = 1e-6
    grad = np.array([(ergm_log_pl(A, grade, th + eps * e) - ergm_log_pl(A, grade, th - eps * e)) / (2 * eps)
                     for e in np.eye(9)])
    assert np.linalg.norm(grad) < 1e-3
    # edges-only pseudo-likelihood is a logistic regression on the constant 2
    from daavm.ergm import _all_changes, _grade_index, _logistic_newton, _weights
    D, y = _all_changes(A, _grade_index(grade), _weights(n))
    th1, H1, g1 = _logistic_newton(D[:, :1], y)
    dens = A[np.triu_indices(n, 1)].mean()
    assert np.linalg.norm(g1) < 1e-6
    assert th1[0] == pytest.approx(0.5 * logit(dens), rel=1e-8)


def test_mple_separation_raises():
    n = 8
    A = np.zeros((n, n), int)
    with pytest.raises(SeparationError):
        ergm_mple(A, np.full(n, 7))


def test_mcmle_fixed_point_and_psd(monkeypatch):
    g = np.random.default_rng(6)
    n = 30
    grade = np.full(n, 7)
    model = ErgmModel(grade)
    th0 = np.zeros(9)
    th0[0] = -1.0
    S = model.sample_stats(th0, 500, 2, g)
    # observed statistic equal to the simulated mean: gradient zero at theta0
    from daavm.ergm import _weighted_moments
    _, mean, _ = _weighted_moments(S, np.zeros(9))

    monkeypatch.setattr("daavm.ergm.ergm_stats", lambda x, gr: mean)
    th, F = ergm_mcmle(np.zeros((n, n)), grade, th0, 500, 2, g, stats_draws=S)
    assert np.allclose(th, th0)
    assert np.allclose(F, F.T) and np.linalg.eigvalsh(F).min() > -1e-10


def test_mcmle_recovers_edge_parameter():
    g = np.random.default_rng(8)
    n = 50
    grade = np.full(n, 7)
    model = ErgmModel(grade)
    theta = np.zeros(9)
    theta[0] = -1.2
    x = model.simulate_aux(theta, 50, g)
    # an edges-only submodel: embed by freezing the other coordinates at 0
    S = model.sample_stats(theta, 1000, 3, g)
    se = math.sqrt(1.0 / np.var(S[:, 0]))
    th, F = ergm_mcmle(x, grade, theta, 1000, 3, g, stats_draws=S)
    assert abs(th[0] - theta[0]) < 3 * max(se, math.sqrt(np.linalg.pinv(F)[0, 0]))


def test_mcmle_collapse_raises():
    g = np.random.default_rng(9)
    n = 20
    grade = np.full(n, 7)
    model = ErgmModel(grade)
    th0 = np.zeros(9)
    th0[0] = -3.0
    S = model.sample_stats(th0, 200, 1, g)
    full = np.ones((n, n), int) - np.eye(n, dtype=int)
    with pytest.raises(MoveTheta0Error):
        ergm_mcmle(full, grade, th0, 200, 1, g, stats_draws=S, max_step=50.0)


def test_network_validation():
    with pytest.raises(ValueError):
        Network(np.array([[0, 1], [0, 0]]), [7, 7])
    with pytest.raises(ValueError):
        Network(np.eye(2, dtype=int), [7, 7])


def test_faux_mesa_like_and_round_trip(tmp_path):
    theta = np.array([-3.2, 1.9, 2.1, 1.9, 2.0, 2.3, 2.7, 0.05, 1.5])
    net = faux_mesa_like(theta, np.random.default_rng(0), cycles=10)
    assert net.n_nodes == 203
    assert np.array_equal(np.bincount(net.grade)[7:13], [62, 40, 42, 25, 24, 10])
    write_network(tmp_path / "e.csv", tmp_path / "n.csv", net)
    back = read_network(tmp_path / "e.csv", tmp_path / "n.csv")
    assert np.array_equal(back.adjacency, net.adjacency)
    assert np.array_equal(back.grade, net.grade)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "i,j"


def test_counts_match_oracle_and_build_stats(rng):
    from daavm.ergm import ergm_counts
    from ergm_oracle import brute_counts
    for _ in range(50):
        n = 9
        A = graph_from_code(int(rng.integers(2**36)), n)
        g = rng.integers(6, 14, size=n)
        c = ergm_counts(A, g)
        e, homo, D, esp = brute_counts(A, g)
        assert c.edges == e and c.homophily.tolist() == homo
        assert c.degree.tolist() == D and c.esp.tolist() == esp
        assert np.allclose(ergm_stats(A, g), brute_stats(A, g), rtol=0, atol=1e-12)
