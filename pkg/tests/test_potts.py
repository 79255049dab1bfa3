import itertools
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from daavm.potts import (PottsModel, potts_exact_log_z, potts_gibbs_cycle, potts_log_pl, potts_mple, potts_stat,
                         potts_stat_distribution, read_lattice, write_lattice)


def pair_count(x):
    m, n = x.shape
    s = 0
    for i in range(m):
        for j in range(n):
            for di, dj in ((0, 1), (1, 0)):
                a, b = i + di, j + dj
                if a < m and b < n and x[i, j] == x[a, b]:
                    s += 1
    return s


def all_configs(m, q):
    for cells in itertools.product(range(1, q + 1), repeat=m * m):
        yield np.array(cells).reshape(m, m)


def test_stat_small_cases():
    assert potts_stat(np.ones((2, 2), int)) == 4
    assert potts_stat(np.array([[1, 2], [2, 1]])) == 0


def test_stat_matches_double_loop(rng):
    for _ in range(20):
        x = rng.integers(1, 5, size=(5, 5))
        assert potts_stat(x) == pair_count(x)


def test_toroidal_stat_all_same():
    # 3x3 torus: 18 neighbour pairs
    assert potts_stat(np.ones((3, 3), int), "toroidal") == 18


def test_relabel_invariance(rng):
    x = rng.integers(1, 5, size=(6, 6))
    perm = np.array([0, 3, 1, 4, 2])
    assert potts_stat(perm[x]) == potts_stat(x)


def test_log_unnorm_examples():
    m = PottsModel(2, 2)
    x = np.ones((2, 2), dtype=np.int8)
    assert m.log_unnorm(x, np.array([0.0])) == 0.0
    assert m.log_unnorm(x, np.array([0.5])) == pytest.approx(2.0)


def test_gibbs_theta_zero_uniform(rng):
    x = np.ones((8, 8), dtype=np.int8)
    counts = np.zeros(4)
    for _ in range(200):
        x = potts_gibbs_cycle(x, 0.0, rng, q=4)
        counts += np.bincount(x.ravel(), minlength=5)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_gibbs_conditional_formula():
    # on a 3x3 torus site (0,0) is swept first, while its four neighbours still hold state 2
    x = np.array([[1, 2, 2], [2, 1, 1], [2, 1, 1]], dtype=np.int8)
    g = np.random.default_rng(3)
    n = 40_000
    hits = sum(potts_gibbs_cycle(x, 0.8, g, q=4, boundary="toroidal")[0, 0] == 2 for _ in range(n))
    p = math.exp(3.2) / (math.exp(3.2) + 3)
    assert abs(hits / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_gibbs_preserves_exact_law():
    m, q, th = 3, 2, 0.8
    configs = list(all_configs(m, q))
    logw = np.array([th * potts_stat(c) for c in configs])
    p = np.exp(logw - logsumexp(logw))
    g = np.random.default_rng(11)
    n = 100_000
    idx = g.choice(len(configs), size=n, p=p)
    codes = np.zeros(len(configs))
    powers = q ** np.arange(m * m)[::-1]
    for k in idx:
        y = potts_gibbs_cycle(configs[k], th, g, q=q)
        codes[int(((y.ravel() - 1) * powers).sum())] += 1
    assert stats.chisquare(codes, p * n).pvalue > 1e-3


def test_log_pl_examples():
    x = np.ones((2, 2), dtype=np.int8)
    assert potts_log_pl(x, 0.0, q=4) == pytest.approx(-4 * math.log(4))
    assert potts_log_pl(x, 0.5, q=4) == pytest.approx(4 * (2 * 0.5 - math.log(math.exp(1.0) + 3)))


def test_log_pl_concave(rng):
    x = rng.integers(1, 5, size=(10, 10))
    th = np.linspace(0, 2, 41)
    v = np.array([potts_log_pl(x, t) for t in th])
    assert np.all(np.diff(v, 2) <= 1e-9)


def test_mple_stationary_and_consistent():
    model = PottsModel(32, 4)
    x = model.simulate_aux(np.array([0.8]), 300, np.random.default_rng(0))
    r = potts_mple(x)
    assert 0.6 < r.theta < 1.0 and not r.degenerate and r.fisher > 0
    h = 1e-6
    grad = (potts_log_pl(x, r.theta + h) - potts_log_pl(x, r.theta - h)) / (2 * h)
    assert abs(grad) < 1e-3  # finite-difference noise dominates the true gradient
    from daavm.potts import _pl_derivs, _pl_terms
    g, _ = _pl_derivs(*_pl_terms(x, 4, "free"), r.theta)
    assert abs(g) < 1e-8


def test_exact_log_z_small():
    assert potts_exact_log_z(2, 2, 0.0) == pytest.approx(4 * math.log(2))
    assert potts_exact_log_z(2, 4, 0.0) == pytest.approx(4 * math.log(4))


def test_exact_log_z_independent_sum():
    direct = logsumexp([0.8 * pair_count(c) for c in all_configs(3, 2)])
    assert potts_exact_log_z(3, 2, 0.8) == pytest.approx(direct, rel=1e-12)


def test_exact_log_z_derivative_is_mean_stat():
    s, c = potts_stat_distribution(3, 2)
    th, h = 0.6, 1e-5
    fd = (potts_exact_log_z(3, 2, th + h) - potts_exact_log_z(3, 2, th - h)) / (2 * h)
    w = c * np.exp(th * s)
    assert fd == pytest.approx((s * w).sum() / w.sum(), abs=1e-6)


def test_subsample_blocks(rng):
    model = PottsModel(6, 4)
    x = rng.integers(1, 5, size=(6, 6))
    sub, sm = model.subsample(x, 2, rng)
    assert sub.shape == sm.shape and sub.size == 18
    full, fm = model.subsample(x, 1, rng)
    assert np.array_equal(full, x)


def test_lattice_round_trip(tmp_path, rng):
    x = rng.integers(1, 5, size=(7, 7)).astype(np.int8)
    write_lattice(tmp_path / "l.txt", x, 4)
    y, q = read_lattice(tmp_path / "l.txt")
    assert q == 4 and np.array_equal(x, y)
    assert (tmp_path / "l.txt").read_text().splitlines()[0] == "7 4"


def test_check_state_rejects_bad():
    m = PottsModel(3, 2)
    with pytest.raises(ValueError):
        m.check_state(np.full((3, 3), 3))
    with pytest.raises(ValueError):
        m.check_state(np.ones((2, 2)))
