import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from gpd_elcr.errors import CalibrationError, DomainError
from gpd_elcr.statfun import (
    betainc,
    betainc_upper,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    critical_value,
    f_cdf,
    f_quantile,
    fisher_critical,
    gammainc_lower,
    gammainc_upper,
    ln_gamma,
    normal_quantile,
)


def bisect(f, lo, hi, target, iters=200):
    """Plain bisection for an increasing ``f``; test oracle only."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_quantile_oracle(p, d1, d2):
    # F cdf through scipy's regularized incomplete beta
    def cdf(x):
        return special.betainc(d1 / 2, d2 / 2, d1 * x / (d1 * x + d2))

    return bisect(cdf, 0.0, 1e3, p)


class TestLnGamma:
    @pytest.mark.parametrize("x, expected", [(1.0, 0.0), (5.0, math.log(24.0)), (0.5, 0.5 * math.log(math.pi))])
    def test_known_values(self, x, expected):
        assert ln_gamma(x) == pytest.approx(expected, abs=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            ln_gamma(0.0)


class TestIncompleteFunctions:
    @given(a=st.floats(0.05, 500), x=st.floats(0.0, 2000))
    @settings(max_examples=300, deadline=None)
    def test_gamma_against_scipy(self, a, x):
        assert gammainc_lower(a, x) == pytest.approx(special.gammainc(a, x), abs=1e-12)
        assert gammainc_upper(a, x) == pytest.approx(special.gammaincc(a, x), abs=1e-12)

    @given(a=st.floats(0.05, 5e4), b=st.floats(0.05, 5e4), x=st.floats(0.0, 1.0))
    @settings(max_examples=300, deadline=None)
    def test_beta_against_scipy(self, a, b, x):
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-11)
        assert betainc_upper(a, b, x) == pytest.approx(special.betaincc(a, b, x), abs=1e-11)

    def test_complements_sum_to_one(self):
        for a, x in [(0.5, 0.1), (3.0, 2.5), (100.0, 120.0)]:
            assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-14)


class TestChiSquare:
    def test_two_df_closed_form(self):
        assert chi2_quantile(0.95, 2) == pytest.approx(-2.0 * math.log(0.05), abs=1e-9)
        assert chi2_quantile(0.5, 2) == pytest.approx(1.386294361, abs=1e-9)

    def test_one_df_is_squared_normal_quantile(self):
        # normal quantile from bisection on the error function
        z = bisect(lambda x: 0.5 * (1.0 + math.erf(x / math.sqrt(2.0))), 0.0, 10.0, 0.975)
        assert chi2_quantile(0.95, 1) == pytest.approx(z * z, abs=1e-9)
        assert chi2_quantile(0.95, 1) == pytest.approx(3.841458821, abs=1e-9)

    def test_normal_quantile_symmetry(self):
        assert normal_quantile(0.5) == 0.0
        assert normal_quantile(0.025) == pytest.approx(-normal_quantile(0.975), abs=1e-15)

    @given(p=st.floats(1e-6, 1 - 1e-6), df=st.integers(1, 200))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, p, df):
        x = chi2_quantile(p, df)
        cdf = chi2_cdf(x, df) if p <= 0.5 else 1.0 - chi2_sf(x, df)
        assert cdf == pytest.approx(p, abs=1e-8)

    @given(p=st.floats(0.01, 0.98), dp=st.floats(1e-3, 0.01), df=st.integers(1, 50))
    @settings(max_examples=100, deadline=None)
    def test_strictly_increasing(self, p, dp, df):
        assert chi2_quantile(p + dp, df) > chi2_quantile(p, df)

    def test_against_scipy(self):
        for p in (0.01, 0.5, 0.9, 0.99, 0.999):
            for df in (1, 2, 7, 30):
                assert chi2_quantile(p, df) == pytest.approx(stats.chi2.ppf(p, df), rel=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_bad_probability(self, p):
        with pytest.raises(DomainError):
            chi2_quantile(p, 2)


class TestFQuantile:
    def test_symmetric_median(self):
        assert f_quantile(0.5, 7, 7) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p, d1, d2", [(0.95, 2, 198), (0.95, 1, 199), (0.99, 3, 10), (0.1, 5, 8)])
    def test_against_bisection_oracle(self, p, d1, d2):
        assert f_quantile(p, d1, d2) == pytest.approx(f_quantile_oracle(p, d1, d2), rel=1e-9)

    def test_order_of_magnitude(self):
        assert 3.0 < f_quantile(0.95, 2, 198) < 3.1

    @given(p=st.floats(1e-4, 1 - 1e-4), d1=st.integers(1, 30), d2=st.integers(1, 5000))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, p, d1, d2):
        assert f_cdf(f_quantile(p, d1, d2), d1, d2) == pytest.approx(p, abs=1e-8)


class TestFisherCritical:
    def test_dim2_composition(self):
        assert fisher_critical(200, 0.95, 2) == pytest.approx(2 * 199 / 198 * f_quantile_oracle(0.95, 2, 198), rel=1e-9)

    def test_dim1_composition(self):
        assert fisher_critical(200, 0.95, 1) == pytest.approx(f_quantile_oracle(0.95, 1, 199), rel=1e-9)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_monotone_decrease_to_chi2(self, dim):
        ks = [10**e for e in range(2, 7)]
        vals = [fisher_critical(k, 0.95, dim) for k in ks]
        chi = chi2_quantile(0.95, dim)
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(v > chi for v in vals)
        assert vals[-1] == pytest.approx(chi, abs=1e-3)

    @given(k=st.integers(5, 10**5), level=st.floats(0.5, 0.999))
    @settings(max_examples=100, deadline=None)
    def test_more_conservative_than_chi2(self, k, level):
        assert fisher_critical(k, level, 2) > chi2_quantile(level, 2)

    def test_small_k_rejected(self):
        with pytest.raises(CalibrationError):
            fisher_critical(4, 0.95, 2)

    def test_dispatch(self):
        assert critical_value(0.95, 2) == chi2_quantile(0.95, 2)
        assert critical_value(0.95, 2, "fisher", k=50) == fisher_critical(50, 0.95, 2)
        with pytest.raises(CalibrationError):
            critical_value(0.95, 2, "fisher")
        with pytest.raises(DomainError):
            critical_value(0.95, 2, "bogus")
