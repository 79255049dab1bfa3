import math

import numpy as np
import pytest

from daavm.diagnostics import Summary, eff, ess, ess_flagged, format_table, hpd, kolmogorov_distance, mcse, summarize
from daavm.samplers import Trace


def make_trace(s1, s2, variant="daavm_f", draws=None):
    n = len(s1)
    if draws is None:
        draws = np.arange(n, dtype=float)[:, None]
    aux = np.asarray(s1, dtype=int)
    return Trace(draws, s1, s2, aux, np.arange(1, n + 1, dtype=float), variant, names=("theta",))


def test_ess_iid(rng):
    e = ess(rng.normal(size=10_000))
    assert 9_000 <= e <= 11_000


def test_ess_duplicated_chain(rng):
    x = np.repeat(rng.normal(size=10_000), 2)
    assert abs(ess(x) - 10_000) <= 1_000


def test_ess_ar1(rng):
    # tau = (1 + r) / (1 - r) = 3 at r = 0.5
    n, r = 200_000, 0.5
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = r * x[i - 1] + e[i] * math.sqrt(1 - r * r)
    assert abs(ess(x) / (n / 3) - 1) < 0.1


def test_ess_constant_chain():
    assert ess_flagged(np.ones(50)) == (0.0, True)
    assert math.isinf(mcse(np.ones(50)))
    with pytest.raises(ValueError):
        ess(np.arange(5.0))


def test_ess_clamp_antithetic():
    x = np.tile([1.0, -1.0], 500)
    assert ess(x) <= 1.5 * x.size


def test_hpd_uniform(rng):
    lo, hi = hpd(rng.uniform(size=100_000))
    assert abs((hi - lo) - 0.95) < 0.01


def test_hpd_normal_and_point_mass(rng):
    lo, hi = hpd(rng.normal(size=200_000))
    assert abs(lo + 1.96) < 0.03 and abs(hi - 1.96) < 0.03
    assert hpd(np.full(30, 2.5)) == (2.5, 2.5)


def test_hpd_skewed_is_shortest(rng):
    x = rng.exponential(size=100_000)
    lo, hi = hpd(x)
    assert lo < 0.01
    assert abs(hi - (-math.log(0.05))) < 0.05


def test_eff_arithmetic():
    # 10 rejections: 7 at stage 1, 3 at stage 2; 5 accepts
    s1 = [False] * 7 + [True] * 8
    s2 = [-1] * 7 + [0] * 3 + [1] * 5
    assert eff(make_trace(s1, s2)) == pytest.approx(0.7)


def test_eff_all_early_and_none():
    assert eff(make_trace([False, False, True], [-1, -1, 1])) == 1.0
    with pytest.warns(RuntimeWarning):
        assert math.isnan(eff(make_trace([True, True], [1, 1])))


def test_eff_undefined_for_avm():
    tr = make_trace([True, True], [1, 0], variant="avm")
    with pytest.raises(ValueError):
        eff(tr)


def test_kolmogorov_distance():
    grid = np.array([0.0, 1.0, 2.0])
    assert kolmogorov_distance([0.5, 1.5], grid, [0.0, 0.5, 1.0]) == 0.0
    assert kolmogorov_distance([0.5, 0.6], grid, [0.0, 0.5, 1.0]) == pytest.approx(0.5)


def test_summarize_exact_values():
    n = 40
    s1 = [True] * n
    s2 = [1, 0] * (n // 2)
    tr = make_trace(s1, s2)
    s = summarize(tr, burnin=10)
    assert s.mean[0] == pytest.approx(np.arange(10, 40).mean())
    assert s.n_draws == 30 and s.aux_sims == n
    assert s.accept_rate == pytest.approx(0.5)
    assert s.eff == 0.0
    assert s.wall_min == pytest.approx(tr.total_ms / 6e4)


def test_summarize_flags_and_errors():
    tr = make_trace([True] * 12, [1] * 12)
    s = summarize(tr, burnin=11)
    assert any("too few" in f for f in s.flags) and s.ess == [None]
    assert any("Eff" in f for f in s.flags)
    with pytest.raises(ValueError):
        summarize(tr, burnin=12)
    const = make_trace([True] * 20, [0] * 20, draws=np.ones((20, 1)))
    assert any("constant" in f for f in summarize(const).flags)


def test_summary_json_round_trip(tmp_path):
    s = summarize(make_trace([True, False] * 10, [1, -1] * 10))
    s.to_json(tmp_path / "s.json")
    assert Summary.from_json(tmp_path / "s.json") == s


def test_format_table_dash_for_avm():
    a = summarize(make_trace([True] * 20, [1, 0] * 10, variant="avm"))
    d = summarize(make_trace([True, False] * 10, [1, -1] * 10))
    lines = format_table([a, d]).splitlines()
    assert lines[0].split()[0] == "method" and len(lines) == 3
    assert lines[1].split()[7] == "-"
    assert "1.00" in lines[2]
