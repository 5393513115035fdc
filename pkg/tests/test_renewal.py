"""
Tests for renewal function estimation and the residual decay fit.
"""

import math

import numpy as np
import pytest

from wvg_shapley.core.distributions import ConditionedLaw, ExponentialWeights, UniformWeights
from wvg_shapley.core.renewal import (
    fit_residual_decay,
    interval_count,
    renewal_asymptote,
    renewal_convolve,
    renewal_counts,
    renewal_mc,
    renewal_summary,
    residual_decay_report,
    uniform_renewal_function,
)
from wvg_shapley.models.exceptions import DomainError, RunawayRenewalError
from wvg_shapley.models.schemas import RenewalMethod


@pytest.mark.unit
class TestClosedForms:
    """Test suite for the asymptote and the U(0,1) renewal function."""

    def test_uniform_renewal_function(self):
        """Test m(Q) = e^Q on (0, 1] and m(2) = e^2 - e."""
        assert uniform_renewal_function(0.5) == pytest.approx(math.exp(0.5))
        assert uniform_renewal_function(2.0) == pytest.approx(math.exp(2) - math.e)
        assert uniform_renewal_function(0.0) == 0.0

    def test_asymptote(self, uniform_law, exp_law):
        """Test Q/E[Y] + E[Y^2]/(2 E[Y]^2) for U(0,1) and Exp(1)."""
        assert renewal_asymptote(uniform_law, 3.0) == pytest.approx(6.0 + 2.0 / 3.0)
        assert renewal_asymptote(exp_law, 5.0) == pytest.approx(6.0)
        below = ConditionedLaw.below(UniformWeights(0, 1), 0.5)
        assert renewal_asymptote(below, 2.0) == pytest.approx(8.0 + 2.0 / 3.0)

    def test_counts_include_empty_sum(self, uniform_law):
        """Test S_0 = 0 counts for Q > 0 and nothing counts for Q <= 0."""
        counts = renewal_counts(np.random.default_rng(0), uniform_law, 10, np.array([0.0, 1e-12]))
        assert np.all(counts[:, 0] == 0)
        assert np.all(counts[:, 1] >= 1)


@pytest.mark.integration
class TestRenewalEstimators:
    """Test suite for Monte Carlo and convolution estimates."""

    def test_convolve_matches_closed_form(self, uniform_law):
        """Test the lattice convolution against the U(0,1) closed form."""
        values = renewal_convolve(uniform_law, [2.5, 10.0], step=1e-4)
        assert values[0] == pytest.approx(uniform_renewal_function(2.5), abs=1e-3)
        assert values[1] == pytest.approx(uniform_renewal_function(10.0), abs=1e-3)

    def test_exponential_mc_is_poisson(self, exp_law):
        """Test m(5) = 6 for Exp(1) within 5 standard errors."""
        estimate = renewal_mc(exp_law, 5.0, reps=20000, seed=3, block_size=4096)
        assert abs(estimate.value - 6.0) <= 5 * estimate.stderr
        assert estimate.reps == 20000

    def test_mc_independent_of_threads(self, uniform_law):
        """Test the estimate never depends on the worker count."""
        one = renewal_mc(uniform_law, 4.0, reps=5000, seed=8, threads=1, block_size=700)
        four = renewal_mc(uniform_law, 4.0, reps=5000, seed=8, threads=4, block_size=700)
        assert one == four

    def test_interval_count(self, exp_law):
        """Test m(10) - m(8) = 2 for Exp(1)."""
        estimate = interval_count(exp_law, 10.0, 2.0, reps=20000, seed=4, block_size=4096)
        assert abs(estimate.value - 2.0) <= 5 * estimate.stderr + 1e-12

    @pytest.mark.parametrize("rate,q", [(0.5, 1.0), (2.0, 5.0), (1.0, 20.0)])
    def test_poisson_exactness(self, rate, q):
        """Test m(Q) = 1 + rate * Q for Exp(rate) within 5 standard errors."""
        law = ConditionedLaw.unconditioned(ExponentialWeights(rate))
        estimate = renewal_mc(law, q, reps=10000, seed=21, block_size=4096)
        assert abs(estimate.value - (1 + rate * q)) <= 5 * estimate.stderr

    def test_empty_interval(self, exp_law):
        """Test x = 0 counts nothing."""
        assert interval_count(exp_law, 3.0, 0.0, reps=100, seed=1).value == 0.0

    def test_interval_beyond_quota(self, exp_law):
        """Test x > Q raises DomainError."""
        with pytest.raises(DomainError):
            interval_count(exp_law, 1.0, 2.0, reps=10, seed=1)

    def test_runaway_guard(self):
        """Test a tiny-mean law trips the draw guard instead of looping."""
        law = ConditionedLaw.below(UniformWeights(0, 1), 1e-9)
        with pytest.raises(RunawayRenewalError):
            renewal_counts(np.random.default_rng(5), law, 64, np.array([1.0]), max_draws=1000)

    def test_conditioned_law_mc_matches_convolve(self):
        """Test both evaluators agree for a Below-conditioned uniform law."""
        law = ConditionedLaw.below(UniformWeights(0, 1), 0.5)
        exact = renewal_convolve(law, [2.0], step=1e-4)[0]
        estimate = renewal_mc(law, 2.0, reps=20000, seed=6, block_size=4096)
        assert abs(estimate.value - exact) <= 5 * estimate.stderr + 1e-3


@pytest.mark.integration
class TestResidualDecay:
    """Test suite for residual tables and the decay fit."""

    def test_summary_rows(self, uniform_law):
        """Test convolution summaries carry no stderr, reps or seed."""
        summary = renewal_summary(uniform_law, [1.0, 2.0], method=RenewalMethod.CONVOLVE)
        assert summary.reps is None and summary.seed is None
        assert summary.grid == [1.0, 2.0]
        assert summary.points[0].stderr is None
        assert summary.residuals[0] == pytest.approx(math.e - 2 - 2 / 3, abs=1e-3)

    def test_mc_summary_needs_seed(self, uniform_law):
        """Test Monte Carlo summaries require reps and seed."""
        with pytest.raises(DomainError):
            renewal_summary(uniform_law, [1.0], method=RenewalMethod.MC, reps=100)

    def test_uniform_residual_decays(self, uniform_law):
        """Test the fitted log-residual slope is negative for U(0,1)."""
        grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        report = residual_decay_report(uniform_law, grid, method=RenewalMethod.CONVOLVE)
        assert report.slope is not None and report.slope < 0
        assert report.decay_consistent
        assert not report.noise_dominated

    def test_exponential_residual_is_noise(self, exp_law):
        """Test Exp(1) residuals vanish and no point is resolvable."""
        report = residual_decay_report(exp_law, [2.0, 4.0, 6.0, 8.0], reps=4000, seed=12)
        assert report.noise_dominated
        assert report.slope is None
        assert report.decay_consistent

    def test_short_or_unsorted_grid(self, uniform_law):
        """Test fewer than four quotas or a non-increasing grid raises DomainError."""
        with pytest.raises(DomainError):
            residual_decay_report(uniform_law, [1.0, 2.0, 3.0], method=RenewalMethod.CONVOLVE)
        with pytest.raises(DomainError):
            residual_decay_report(uniform_law, [1.0, 3.0, 2.0, 4.0], method=RenewalMethod.CONVOLVE)

    def test_fit_uses_only_resolvable_points(self, uniform_law):
        """Test a single resolvable point gives no slope."""
        summary = renewal_summary(uniform_law, [1.0], method=RenewalMethod.CONVOLVE)
        report = fit_residual_decay(summary)
        assert report.resolvable == [1.0]
        assert report.slope is None
