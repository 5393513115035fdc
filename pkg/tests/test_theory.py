"""
Tests for the theoretical predictors, series and closed forms.
"""

import math

import numpy as np
import pytest
from scipy import special

from wvg_shapley.core.distributions import ExponentialWeights, UniformWeights
from wvg_shapley.core.quadrature import integrate_interval, integrate_unit
from wvg_shapley.core.theory import (
    asymptotic_quota_range,
    exp_formulas,
    exp_max_integral,
    exp_min_integral,
    harmonic_integral,
    harmonic_number,
    jn_value,
    limit_values,
    predict_max_expected,
    predict_min_expected,
    predict_rank_expected,
    predict_rank_limit,
    ratio_above,
    ratio_below,
    scaled_exp1,
    uniform_series_max,
    uniform_series_min,
)
from wvg_shapley.models.exceptions import ConvergenceError, DomainError
from wvg_shapley.models.schemas import PredictionForm, PredictionTarget, Unbounded


@pytest.mark.unit
class TestQuadrature:
    """Test suite for the quadrature wrapper."""

    def test_finite_interval(self):
        """Test a polynomial integral and its error estimate."""
        result = integrate_interval(lambda t: t * t, 0.0, 3.0)
        assert result.value == pytest.approx(9.0, rel=1e-12)
        assert result.abserr <= 1e-9 * 9.0

    def test_half_line(self):
        """Test the mapped half line on integral of t e^-t."""
        assert integrate_interval(lambda t: t * math.exp(-t), 0.0, math.inf).value == pytest.approx(1.0, rel=1e-10)

    def test_unmet_tolerance_raises(self):
        """Test an oscillating integrand with a tiny subdivision limit fails loudly."""
        with pytest.raises(ConvergenceError):
            integrate_unit(lambda t: math.sin(2000.0 * t) + 1e-3, rtol=1e-12, limit=3)


@pytest.mark.unit
class TestEndpointRatios:
    """Test suite for x / E[X | X <= x] and x / E[X | X >= x] near support ends."""

    def test_ratio_below_tends_to_two(self, uniform01, exp1):
        """Test the ratio tends to 2 at a zero lower end."""
        for d in (uniform01, exp1):
            assert ratio_below(d, 1e-14) == pytest.approx(2.0, rel=1e-9)
            assert ratio_below(d, 1e-6) == pytest.approx(2.0, rel=1e-5)

    def test_ratio_below_positive_lower_end(self):
        """Test the ratio tends to 1 when the support starts above zero."""
        d = UniformWeights(1.0, 2.0)
        assert ratio_below(d, 1.0 + 1e-13) == pytest.approx(1.0, rel=1e-9)

    def test_ratio_above_tends_to_one(self, uniform01):
        """Test the ratio tends to 1 at a finite upper end."""
        assert ratio_above(uniform01, 1.0 - 1e-13) == pytest.approx(1.0, rel=1e-9)
        assert ratio_above(uniform01, 0.5) == pytest.approx(0.5 / 0.75)


@pytest.mark.unit
class TestExtremePredictors:
    """Test suite for the max and min rank predictors."""

    @pytest.mark.parametrize("n", [2, 10, 100, 1000])
    def test_uniform_max_is_two_over_n(self, uniform01, n):
        """Test E[phi_max] = 2/n for U(0, b) at every n."""
        prediction = predict_max_expected(uniform01, n)
        assert prediction.value * n == pytest.approx(2.0, rel=1e-9)
        assert prediction.form is PredictionForm.QUADRATURE
        assert uniform_series_max(0.0, 1.0, n).value == pytest.approx(2.0 / n, rel=1e-15)

    @pytest.mark.parametrize("n", [5, 10, 20, 50])
    def test_uniform_min_series_matches_quadrature(self, uniform01, n):
        """Test the alternating series against quadrature within 1e-8."""
        series = uniform_series_min(0.0, 1.0, n)
        quadrature = predict_min_expected(uniform01, n)
        assert abs(series.value - quadrature.value) < 1e-8
        assert series.terms > 0
        assert series.form is PredictionForm.SERIES

    def test_uniform_min_leading_terms(self):
        """Test the first terms 2/(n(n+1)) - 4/(n(n+1)(n+2)) + ... for n = 50."""
        n = 50
        head = 2 / (n * (n + 1)) - 4 / (n * (n + 1) * (n + 2)) + 12 / (n * (n + 1) * (n + 2) * (n + 3))
        assert uniform_series_min(0.0, 1.0, n).value == pytest.approx(head, rel=5e-4)

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (0.5, 1.5), (1.0, 3.0), (2.0, 5.0)])
    @pytest.mark.parametrize("n", [5, 10, 12, 20, 50])
    def test_uniform_series_match_quadrature(self, a, b, n):
        """Test both series against quadrature over a grid of supports and sizes."""
        d = UniformWeights(a, b)
        assert uniform_series_max(a, b, n).value == pytest.approx(predict_max_expected(d, n).value, rel=1e-8)
        assert uniform_series_min(a, b, n).value == pytest.approx(predict_min_expected(d, n).value, rel=1e-8)

    def test_series_cap_raises(self):
        """Test a slowly converging series hits the term cap."""
        with pytest.raises(ConvergenceError):
            uniform_series_min(0.0, 1.0, 2, max_terms=100)

    @pytest.mark.parametrize("n", [5, 20, 100])
    def test_exponential_min_closed_form(self, exp1, n):
        """Test quadrature against 1/n - e^n E_1(n)."""
        assert predict_min_expected(exp1, n).value == pytest.approx(exp_min_integral(n), rel=1e-7)

    @pytest.mark.parametrize("n", [5, 50, 500])
    def test_exponential_max_integral(self, exp1, n):
        """Test the probability-scale predictor against the direct half-line integral."""
        assert predict_max_expected(exp1, n).value == pytest.approx(exp_max_integral(n), rel=1e-7)

    def test_exponential_scale_invariance(self):
        """Test Exp(rate) predictions do not depend on the rate."""
        assert predict_max_expected(ExponentialWeights(3.0), 20).value == pytest.approx(
            predict_max_expected(ExponentialWeights(1.0), 20).value, rel=1e-8
        )

    def test_predictors_need_two_agents(self, uniform01):
        """Test n < 2 raises DomainError."""
        with pytest.raises(DomainError):
            predict_max_expected(uniform01, 1)
        with pytest.raises(DomainError):
            uniform_series_max(0.0, 1.0, 1)
        with pytest.raises(DomainError):
            uniform_series_min(1.0, 3.0, 1)

    def test_quota_ranges(self):
        """Test the claimed normalized quota ranges."""
        low, high = asymptotic_quota_range(16, PredictionTarget.MAX)
        assert low == pytest.approx(16 ** -0.75)
        assert high == pytest.approx(0.95)
        low, high = asymptotic_quota_range(27, PredictionTarget.MIN, mean=0.5)
        assert low == pytest.approx(2 * 27 ** -0.75)
        assert high == pytest.approx(1 - 1 / 3)


@pytest.mark.unit
class TestRankPredictors:
    """Test suite for rank-p predictions."""

    def test_rank_limits(self, uniform01, exp1):
        """Test 2p for U(0,1) and -ln(1-p) for Exp(1)."""
        assert predict_rank_limit(uniform01, 0.3) == pytest.approx(0.6)
        assert predict_rank_limit(exp1, 0.5) == pytest.approx(math.log(2))

    @pytest.mark.parametrize("p", [0.0, 1.0, 1.2])
    def test_rank_limit_domain(self, uniform01, p):
        """Test p outside (0, 1) raises DomainError."""
        with pytest.raises(DomainError):
            predict_rank_limit(uniform01, p)

    def test_finite_rank_predictor_approaches_limit(self, uniform01, exp1):
        """Test n E[phi_pn] at n = 200 is close to the limit for a mid rank."""
        for d in (uniform01, exp1):
            prediction = predict_rank_expected(d, 200, 0.4)
            assert prediction.value * 200 == pytest.approx(predict_rank_limit(d, 0.4), abs=0.02)

    def test_finite_rank_predictor_top_rank_is_max(self, exp1):
        """Test p = 1 reduces to the max predictor."""
        assert predict_rank_expected(exp1, 30, 1.0).value == pytest.approx(
            predict_max_expected(exp1, 30).value, rel=1e-7
        )

    def test_rank_limit_tends_to_limit_max(self, uniform01, exp1):
        """Test F^{-1}(p)/E[X] rises to chi_max/E[X] as p -> 1, unbounded for Exp(1)."""
        ps = [0.9, 0.99, 0.999, 1 - 1e-6, 1 - 1e-9]
        for d in (uniform01, UniformWeights(1, 3)):
            values = [predict_rank_limit(d, p) for p in ps]
            assert values == sorted(values)
            assert values[-1] == pytest.approx(limit_values(d).limit_max, abs=1e-8)
        assert predict_rank_limit(exp1, 1 - 1e-9) > 20.0

    def test_max_limit_approached_monotonically(self):
        """Test n E[phi_max] for U(1,3) increases towards b/E[X] = 3/2 up to n = 10^4."""
        d = UniformWeights(1, 3)
        scaled = [n * predict_max_expected(d, n).value for n in (2, 5, 10, 50, 100, 1000, 10_000)]
        assert all(lower <= upper + 1e-9 for lower, upper in zip(scaled, scaled[1:]))
        assert scaled[-1] <= 1.5 + 1e-9
        assert scaled[-1] == pytest.approx(1.5, abs=1e-3)

    def test_limit_values(self, uniform01, exp1):
        """Test chi_max/E[X] and chi_min/E[X]."""
        uniform = limit_values(uniform01)
        assert (uniform.limit_max, uniform.limit_min) == (2.0, 0.0)
        exponential = limit_values(exp1)
        assert exponential.limit_max == Unbounded.INFINITY
        assert limit_values(UniformWeights(1, 3)).limit_min == pytest.approx(0.5)


@pytest.mark.unit
class TestExponentialClosedForms:
    """Test suite for harmonic integrals and the exponential integral."""

    def test_harmonic_integral_values(self):
        """Test I_0 = 1, I_1 = 3/4 and the integral definition at n = 3."""
        assert harmonic_integral(0) == 1.0
        assert harmonic_integral(1) == pytest.approx(0.75)
        direct = integrate_unit(lambda t: (1 - t) ** 3 * -math.log(t) if t > 0 else 0.0).value
        assert harmonic_integral(3) == pytest.approx(direct, rel=1e-9)
        assert harmonic_number(4) == pytest.approx(25 / 12)

    def test_harmonic_identity_up_to_200(self):
        """Test I_n = H_{n+1}/(n+1) against the integral and digamma for n = 0..200."""
        gamma = float(np.euler_gamma)
        for n in range(201):
            # t = e^-u gives a smooth integrand; the tail past u = 60 is below 1e-23
            direct = integrate_interval(lambda u, n=n: (-math.expm1(-u)) ** n * u * math.exp(-u), 0.0, 60.0, rtol=1e-12).value
            assert harmonic_integral(n) == pytest.approx(direct, rel=1e-10)
            assert harmonic_integral(n) == pytest.approx((float(special.digamma(n + 2)) + gamma) / (n + 1), rel=1e-12)

    @pytest.mark.parametrize("n", [0, 5, 20])
    def test_jn_matches_integral(self, n):
        """Test the harmonic-number form of J_n against its defining integral."""
        def integrand(t: float) -> float:
            if t <= 0:
                return 0.0
            log_inv = -math.log(t)
            return (1 - t) ** n * log_inv * (t + t * log_inv)

        assert jn_value(n) == pytest.approx(integrate_unit(integrand).value, rel=1e-8)

    @pytest.mark.parametrize("n", [10, 50])
    def test_max_integral_bounded_below_by_main_terms(self, n):
        """Test I_n + J_n underestimates the exact max integral."""
        assert harmonic_integral(n) + jn_value(n) < exp_max_integral(n)

    def test_scaled_exp1(self):
        """Test e^x E_1(x) on both sides of the branch point."""
        for x in (0.5, 5.0, 20.0, 40.0):
            assert scaled_exp1(x) == pytest.approx(math.exp(x) * float(special.exp1(x)), rel=1e-12)
        assert scaled_exp1(9.999999) == pytest.approx(scaled_exp1(10.000001), rel=1e-6)
        assert scaled_exp1(1e6) == pytest.approx(1 / (1e6 + 1), rel=1e-10)

    def test_exp_formulas(self):
        """Test the asymptotic forms (ln n + gamma)/n and 1/n^2."""
        formulas = exp_formulas(100)
        assert formulas.max_asymptotic == pytest.approx((math.log(100) + np.euler_gamma) / 100)
        assert formulas.min_asymptotic == pytest.approx(1e-4)
        assert formulas.min_integral * 100 ** 2 == pytest.approx(1 - 2 / 100 + 6 / 100 ** 2, rel=1e-3)

    def test_jn_bounds(self):
        """Test J_0 = 1/2, J_n > 0 and n^2 J_n / ln^2 n stays below 5 at n = 100."""
        assert jn_value(0) == pytest.approx(0.5)
        assert all(jn_value(n) > 0 for n in range(0, 60))
        assert 100 ** 2 * jn_value(100) / math.log(100) ** 2 < 5

    def test_min_integral_range(self):
        """Test 1/n^2 - O(1/n^3) at n = 100."""
        assert 0.95e-4 <= exp_min_integral(100) <= 1.0e-4

    @pytest.mark.parametrize("n", [2, 5, 10, 50])
    def test_min_integral_matches_quadrature(self, n):
        """Test 1/n - e^n E_1(n) against the half-line integral."""
        direct = integrate_interval(lambda x: math.exp(-n * x) * x / (x + 1), 0.0, math.inf, rtol=1e-12).value
        assert exp_min_integral(n) == pytest.approx(direct, rel=1e-9)
