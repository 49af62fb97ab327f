import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from gradedvocal import stats
from gradedvocal.synth import gen_geometric_ints, gen_powerlaw_ints
from oracles import wilcoxon_enum


def direct_powerlaw_loglik(x, alpha, xmin):
    z = sum(k ** -alpha for k in range(xmin, 2_000_000)) + special.zeta(alpha, 2_000_000)
    return float(sum(-alpha * math.log(v) - math.log(z) for v in x))


# --- entropy -------------------------------------------------------------------------

def test_entropy_examples():
    assert stats.shannon_entropy([0.25] * 4) == 2.0
    assert stats.shannon_entropy([1, 0, 0]) == 0.0
    assert stats.shannon_entropy([0.5, 0.25, 0.25]) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        stats.shannon_entropy([1.5, -0.5])


# --- power law -------------------------------------------------------------------------

def test_hill_closed_form():
    assert stats.hill_estimator([2, 4], 2) == pytest.approx(1 + 2 / math.log(2 * 4 / 1.5 ** 2), rel=1e-12)
    assert stats.hill_estimator([2, 4], 2, discrete=False) == pytest.approx(1 + 2 / math.log(2), rel=1e-12)
    assert 1 + 2 / math.log(2) == pytest.approx(3.885, abs=1e-3)


def test_powerlaw_recovery_and_loglik_oracle():
    x = gen_powerlaw_ints(1.79, 1, 10_000, seed=0)
    fit = stats.fit_powerlaw(x, 1)
    assert abs(fit.params["alpha"] - 1.79) <= 0.1
    assert fit.n_tail == 10_000
    assert fit.loglik == pytest.approx(direct_powerlaw_loglik(x, fit.params["alpha"], 1), abs=1e-6)


def test_powerlaw_round_trip_alpha_2_5():
    # the rounding generator is biased at xmin=1 for steep tails; xmin=5 removes it
    x = gen_powerlaw_ints(2.5, 5, 10_000, seed=1)
    assert abs(stats.fit_powerlaw(x, 5).params["alpha"] - 2.5) <= 0.1


def test_powerlaw_degenerate_and_short():
    with pytest.raises(stats.FitError, match="degenerate"):
        stats.fit_powerlaw([3] * 20, 1)
    with pytest.raises(stats.FitError):
        stats.fit_powerlaw([1, 2, 3], 1)


def test_mle_optimality_on_grid():
    x = gen_powerlaw_ints(1.79, 1, 5000, seed=2)
    fit = stats.fit_powerlaw(x, 1)
    a = fit.params["alpha"]
    for da in (-0.05, -0.01, 0.01, 0.05):
        assert stats.powerlaw_loglik(x, a + da, 1).sum() < fit.loglik
    g = gen_geometric_ints(0.5, 1, 5000, seed=3)
    ef = stats.fit_exponential(g, 1)
    lam = ef.params["lambda"]
    for dl in (-0.05, 0.05):
        assert stats.exponential_loglik(g, lam + dl, 1).sum() < ef.loglik


# --- exponential and truncated ------------------------------------------------------------

def test_geometric_recovery():
    x = gen_geometric_ints(0.5, 1, 10_000, seed=4)
    assert abs(stats.fit_exponential(x, 1).params["lambda"] - 0.5) <= 0.03


def test_truncated_lambda_near_zero_on_power_law():
    x = gen_powerlaw_ints(1.79, 1, 10_000, seed=5)
    fit = stats.fit_truncated_powerlaw(x, 1)
    assert fit.params["lambda"] < 0.02


def test_truncated_normaliser_matches_summation():
    for alpha, lam in [(0.5, 0.1), (1.5, 0.01), (2.2, 0.0005)]:
        direct = math.log(sum(k ** -alpha * math.exp(-lam * k) for k in range(1, 200_000)))
        assert stats.truncated_powerlaw_logz(alpha, lam, 1) == pytest.approx(direct, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["pl", "geo", "mix"]))
def test_truncated_nests_powerlaw(seed, kind):
    rng = np.random.default_rng(seed)
    if kind == "pl":
        x = gen_powerlaw_ints(rng.uniform(1.5, 3), 1, 400, seed)
    elif kind == "geo":
        x = gen_geometric_ints(rng.uniform(0.1, 1), 1, 400, seed)
    else:
        x = np.concatenate([gen_powerlaw_ints(2, 1, 200, seed), gen_geometric_ints(0.3, 1, 200, seed)])
    if len(np.unique(x)) < 2:
        return
    pl = stats.fit_powerlaw(x, 1)
    tpl = stats.fit_truncated_powerlaw(x, 1)
    assert tpl.loglik >= pl.loglik - 1e-9
    assert tpl.params["alpha"] >= 0 and tpl.params["lambda"] >= 0
    assert stats.fit_truncated_powerlaw(x, 1).loglik == tpl.loglik


# --- likelihood ratio -----------------------------------------------------------------------

def test_lrt_identical_fits():
    x = gen_powerlaw_ints(2, 1, 500, seed=6)
    f = stats.fit_powerlaw(x, 1)
    r = stats.likelihood_ratio_test(x, f, f)
    assert (r.R, r.p_value, r.preferred) == (0.0, 1.0, None)


def test_lrt_direction():
    x = gen_powerlaw_ints(1.79, 1, 10_000, seed=7)
    r = stats.likelihood_ratio_test(x, stats.fit_powerlaw(x, 1), stats.fit_exponential(x, 1))
    assert r.R > 0 and r.p_value < 0.05 and r.preferred == "powerlaw"
    g = gen_geometric_ints(0.5, 1, 10_000, seed=8)
    r = stats.likelihood_ratio_test(g, stats.fit_powerlaw(g, 1), stats.fit_exponential(g, 1))
    assert r.R < 0 and r.p_value < 0.05 and r.preferred == "exponential"


def test_lrt_p_monotone_in_R():
    x = gen_powerlaw_ints(1.79, 1, 300, seed=9)
    pl, ex = stats.fit_powerlaw(x, 1), stats.fit_exponential(x, 1)
    results = []
    for n in (20, 60, 150, 300):
        results.append(stats.likelihood_ratio_test(x[:n], pl, ex))
    by_r = sorted(results, key=lambda r: abs(r.R))
    assert [r.p_value for r in by_r] == sorted([r.p_value for r in by_r], reverse=True)


def test_lrt_requires_same_xmin():
    x = gen_powerlaw_ints(2, 2, 500, seed=10)
    with pytest.raises(ValueError):
        stats.likelihood_ratio_test(x, stats.fit_powerlaw(x, 2), stats.fit_exponential(x, 3))


def test_scan_xmin_and_compare():
    x = np.concatenate([gen_geometric_ints(1.0, 1, 3000, 11), gen_powerlaw_ints(2.2, 6, 3000, 12)])
    xmin, fit = stats.scan_xmin(x)
    assert 3 <= xmin <= 10
    out = stats.compare_tail_models(x, xmin)
    assert set(out["fits"]) == {"powerlaw", "exponential", "truncated_powerlaw"}
    assert "powerlaw_vs_exponential" in out["tests"]


# --- Wilcoxon ---------------------------------------------------------------------------------

def test_wilcoxon_examples():
    W, p = stats.wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
    assert W == 6 and p == pytest.approx(0.1, abs=1e-15)
    assert stats.wilcoxon_rank_sum([1, 2, 2, 5], [5, 2, 1, 2])[1] == 1.0
    with pytest.raises(ValueError):
        stats.wilcoxon_rank_sum([], [1])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=5, unique=True),
       st.lists(st.floats(-100, 100), min_size=1, max_size=5, unique=True))
def test_wilcoxon_exact_matches_enumeration(x, y):
    if set(x) & set(y):
        return
    _, p = stats.wilcoxon_rank_sum(x, y, "exact")
    assert p == pytest.approx(wilcoxon_enum(x, y), abs=1e-12)
    assert p == pytest.approx(stats.wilcoxon_rank_sum(y, x, "exact")[1], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=20), st.lists(st.integers(0, 5), min_size=1, max_size=20))
def test_wilcoxon_symmetric_with_ties(x, y):
    assert stats.wilcoxon_rank_sum(x, y)[1] == pytest.approx(stats.wilcoxon_rank_sum(y, x)[1], abs=1e-12)


def test_wilcoxon_exact_vs_normal_6_6():
    rng = np.random.default_rng(13)
    for _ in range(200):
        v = rng.permutation(12).astype(float)
        pe = stats.wilcoxon_rank_sum(v[:6], v[6:], "exact")[1]
        pn = stats.wilcoxon_rank_sum(v[:6], v[6:], "normal")[1]
        assert abs(pe - pn) <= 0.02


def test_wilcoxon_power():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        hits += stats.wilcoxon_rank_sum(rng.normal(0, 1, 50), rng.normal(1, 1, 50))[1] < 0.05
    assert hits >= 18


def test_wilcoxon_normal_matches_scipy():
    from scipy.stats import mannwhitneyu
    rng = np.random.default_rng(14)
    x, y = rng.integers(0, 6, 30), rng.integers(1, 7, 25)
    ref = mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True).pvalue
    assert stats.wilcoxon_rank_sum(x, y)[1] == pytest.approx(ref, rel=1e-10)
