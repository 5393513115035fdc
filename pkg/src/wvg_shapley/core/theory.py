"""
Theoretical predictors for expected extreme-rank and rank-p Shapley values.

For quotas inside the admissible range the expected value of the top rank is
(1/n) * E[x / E[X | X <= x]] with x the maximum of n draws, and the bottom
rank mirrors it with the minimum and E[X | X >= x]. Integrals are taken on
the probability scale (x = quantile of the order statistic at level v), which
keeps the integrand free of the sharp peak the order-statistic density
develops for large n.
"""

import logging
import math
from typing import Callable, List, Tuple

import numpy as np
from scipy import special, stats

from ..models.exceptions import ConvergenceError, DomainError
from ..models.schemas import (
    ExponentialFormulas,
    ExtremeKind,
    LimitValues,
    Prediction,
    PredictionForm,
    PredictionTarget,
    Unbounded,
)
from .distributions import UniformWeights, WeightDistribution, extreme_quantile
from .quadrature import integrate_interval, integrate_unit

logger = logging.getLogger(__name__)

# Relative distance to a support end below which the analytic endpoint limit is used
ENDPOINT_EPS = 1e-12
SERIES_ABS_FLOOR = 1e-16
LENTZ_TINY = 1e-300
LENTZ_EPS = 1e-16
LENTZ_MAX_ITER = 10_000


# Conditional-mean ratios with explicit endpoint limits

def _mean_below(d: WeightDistribution, x: float) -> float:
    lower = d.support.lower
    if x - lower <= ENDPOINT_EPS * max(1.0, d.mean):
        # density positive at the lower end: E[X | X <= x] ~ (lower + x) / 2
        return (lower + x) / 2
    return d.moment_below(x, 1)


def _mean_above(d: WeightDistribution, x: float) -> float:
    upper = d.support.upper_value
    if math.isfinite(upper) and upper - x <= ENDPOINT_EPS * max(1.0, d.mean):
        return (x + upper) / 2
    return d.moment_above(x, 1)


def ratio_below(d: WeightDistribution, x: float) -> float:
    """x / E[X | X <= x]; tends to 2 at a zero lower end, 1 at a positive one."""
    return x / _mean_below(d, x)


def ratio_above(d: WeightDistribution, x: float) -> float:
    """x / E[X | X >= x]; tends to 1 at a finite upper end."""
    return x / _mean_above(d, x)


def _require_agents(n: int, minimum: int = 2) -> None:
    if n < minimum:
        raise DomainError(f"prediction needs n >= {minimum}, got n={n}")


def _extreme_expectation(
    d: WeightDistribution,
    n: int,
    which: ExtremeKind,
    g: Callable[[WeightDistribution, float], float],
    rtol: float,
    limit: int,
):
    def integrand(v: float) -> float:
        return g(d, float(extreme_quantile(d, v, n, which)))

    return integrate_unit(integrand, rtol=rtol, limit=limit)


def asymptotic_quota_range(n: int, target: PredictionTarget, eps: float = 0.05, mean: float = 1.0) -> Tuple[float, float]:
    """
    Normalized quotas for which the extreme-rank predictions are claimed.

    The lower end corresponds to an absolute quota of n^(1/4); ``mean`` is
    E[X] of the weight law.
    """
    lower = n ** -0.75 / mean
    if PredictionTarget(target) is PredictionTarget.MIN:
        return lower, 1.0 - n ** (-1.0 / 3.0)
    return lower, 1.0 - eps


def predict_max_expected(d: WeightDistribution, n: int, rtol: float = 1e-9, limit: int = 500) -> Prediction:
    """
    E[phi_max] = (1/n) * E[x / E[X | X <= x]], x the max of n draws.

    Raises:
        ConvergenceError: If the quadrature tolerance is not met
    """
    _require_agents(n)
    result = _extreme_expectation(d, n, ExtremeKind.MAX, ratio_below, rtol, limit)
    return Prediction(
        dist=d.spec,
        target=PredictionTarget.MAX,
        value=result.value / n,
        form=PredictionForm.QUADRATURE,
        n=n,
        error_estimate=result.abserr / n,
        quota_range=asymptotic_quota_range(n, PredictionTarget.MAX, mean=d.mean),
    )


def predict_min_expected(d: WeightDistribution, n: int, rtol: float = 1e-9, limit: int = 500) -> Prediction:
    """
    E[phi_min] = (1/n) * E[x / E[X | X >= x]], x the min of n draws.

    Raises:
        ConvergenceError: If the quadrature tolerance is not met
    """
    _require_agents(n)
    result = _extreme_expectation(d, n, ExtremeKind.MIN, ratio_above, rtol, limit)
    return Prediction(
        dist=d.spec,
        target=PredictionTarget.MIN,
        value=result.value / n,
        form=PredictionForm.QUADRATURE,
        n=n,
        error_estimate=result.abserr / n,
        quota_range=asymptotic_quota_range(n, PredictionTarget.MIN, mean=d.mean),
    )


def predict_rank_expected(
    d: WeightDistribution, n: int, p: float, rtol: float = 1e-9, limit: int = 500
) -> Prediction:
    """
    Finite-n rank predictor (1/n) * E[x / E[X_{p|x}]].

    x is the k-th smallest of n draws with k = round(p*n) clamped to 1..n,
    and X_{p|x} the p-mixture of the law conditioned below and above x.
    """
    _require_agents(n)
    if not 0 < p <= 1:
        raise DomainError(f"rank position p must lie in (0, 1], got {p}")
    k = min(max(int(round(p * n)), 1), n)
    low_shape = stats.beta(k, n - k + 1)
    high_shape = stats.beta(n - k + 1, k)

    def ratio(x: float) -> float:
        mixed = (1.0 - p) * _mean_above(d, x) if p < 1 else 0.0
        if p > 0:
            mixed += p * _mean_below(d, x)
        return x / mixed

    def integrand(v: float) -> float:
        u = float(low_shape.ppf(v))
        x = float(d.ppf(u)) if u < 0.5 else float(d.isf(float(high_shape.isf(v))))
        return ratio(x)

    result = integrate_unit(integrand, rtol=rtol, limit=limit)
    return Prediction(
        dist=d.spec,
        target=PredictionTarget.RANK,
        value=result.value / n,
        form=PredictionForm.QUADRATURE,
        n=n,
        p=p,
        error_estimate=result.abserr / n,
    )


def predict_rank_limit(d: WeightDistribution, p: float) -> float:
    """lim n * E[phi_{pn}] = F^{-1}(p) / E[X] for 0 < p < 1."""
    if not 0 < p < 1:
        raise DomainError(f"rank position p must lie in (0, 1), got {p}")
    return float(d.ppf(p)) / d.mean


def limit_values(d: WeightDistribution) -> LimitValues:
    """Limits of n*E[phi_max] and n*E[phi_min]: chi_max/E[X] and chi_min/E[X]."""
    support = d.support
    limit_max = support.upper_value / d.mean if support.is_bounded else Unbounded.INFINITY
    return LimitValues(limit_max=limit_max, limit_min=support.lower / d.mean)


# Uniform series

def _uniform_series(
    lead: float,
    coefficient: float,
    ratio: float,
    n: int,
    tol: float,
    max_terms: int,
) -> Tuple[float, int, float]:
    """
    lead/n + coefficient * sum_{d>=1} ratio^d * d!/(n(n+1)...(n+d)).

    Returns (value, terms used, last term magnitude).
    """
    terms: List[float] = [lead / n]
    if coefficient == 0.0 or ratio == 0.0:
        return terms[0], 0, 0.0

    term = 1.0 / n
    partial = terms[0]
    for d in range(1, max_terms + 1):
        term *= ratio * d / (n + d)
        contribution = coefficient * term
        terms.append(contribution)
        partial += contribution
        if abs(contribution) < tol * abs(partial) and abs(contribution) < SERIES_ABS_FLOOR:
            logger.debug(f"uniform series converged after {d} terms")
            return math.fsum(terms), d, abs(contribution)

    raise ConvergenceError(f"uniform series did not converge within {max_terms} terms (n={n})")


def _check_uniform(a: float, b: float, n: int) -> None:
    if not (0 <= a < b):
        raise DomainError(f"uniform series needs 0 <= a < b, got a={a}, b={b}")
    _require_agents(n)


def uniform_series_max(a: float, b: float, n: int, tol: float = 1e-12, max_terms: int = 10_000) -> Prediction:
    """
    E[phi_max] for U(a, b) as (2b/(a+b))/n - (2a/(a+b)) * sum_d r^d d!/(n...(n+d)),
    r = (b-a)/(a+b). With a = 0 the sum vanishes and the value is 2/n.
    """
    _check_uniform(a, b, n)
    r = (b - a) / (a + b)
    value, terms, last = _uniform_series(2 * b / (a + b), -2 * a / (a + b), r, n, tol, max_terms)
    return Prediction(
        dist=UniformWeights(a, b).spec,
        target=PredictionTarget.MAX,
        value=value,
        form=PredictionForm.SERIES,
        n=n,
        terms=terms,
        error_estimate=last,
        quota_range=asymptotic_quota_range(n, PredictionTarget.MAX, mean=(a + b) / 2),
    )


def uniform_series_min(a: float, b: float, n: int, tol: float = 1e-12, max_terms: int = 10_000) -> Prediction:
    """
    E[phi_min] for U(a, b): (2a/(a+b))/n + (2b/(a+b)) * sum_d (-1)^(d+1) r^d d!/(n...(n+d)).

    For a = 0 this is 2/(n(n+1)) - 4/(n(n+1)(n+2)) + 12/(n(n+1)(n+2)(n+3)) - ...
    """
    _check_uniform(a, b, n)
    r = (b - a) / (a + b)
    # alternating sign folded into a negative ratio: (-r)^d, coefficient -2b/(a+b)
    value, terms, last = _uniform_series(2 * a / (a + b), -2 * b / (a + b), -r, n, tol, max_terms)
    return Prediction(
        dist=UniformWeights(a, b).spec,
        target=PredictionTarget.MIN,
        value=value,
        form=PredictionForm.SERIES,
        n=n,
        terms=terms,
        error_estimate=last,
        quota_range=asymptotic_quota_range(n, PredictionTarget.MIN, mean=(a + b) / 2),
    )


# Exponential closed forms

def harmonic_number(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def harmonic_integral(n: int) -> float:
    """I_n = integral_0^1 (1-t)^n ln(1/t) dt = H_{n+1}/(n+1); I_0 = 1."""
    if n < 0:
        raise DomainError(f"harmonic integral needs n >= 0, got {n}")
    return harmonic_number(n + 1) / (n + 1)


def scaled_exp1(x: float) -> float:
    """
    e^x * E_1(x) for x > 0.

    Below 10 the scipy exponential integral is scaled directly; above, a
    modified Lentz continued fraction evaluates the scaled value without
    forming e^x.
    """
    if x <= 0:
        raise DomainError(f"E_1 needs x > 0, got {x}")
    if x < 10:
        return math.exp(x) * float(special.exp1(x))

    b = x + 1.0
    c = 1.0 / LENTZ_TINY
    d = 1.0 / b
    h = d
    for i in range(1, LENTZ_MAX_ITER + 1):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < LENTZ_EPS:
            return h
    raise ConvergenceError(f"E_1 continued fraction did not converge at x={x}")


def exp_min_integral(n: int) -> float:
    """integral_0^inf e^(-n x) x/(x+1) dx = 1/n - e^n E_1(n)."""
    return 1.0 / n - scaled_exp1(float(n))


def exp_formulas(n: int) -> ExponentialFormulas:
    """Closed forms behind the Exp(1) extreme-rank predictions."""
    _require_agents(n)
    return ExponentialFormulas(
        n=n,
        harmonic_integral=harmonic_integral(n),
        min_integral=exp_min_integral(n),
        max_asymptotic=(math.log(n) + np.euler_gamma) / n,
        min_asymptotic=1.0 / n ** 2,
    )


def jn_value(n: int) -> float:
    """
    J_n = 1/((n+1)(n+2)) * sum_{i=0}^n [2 H_i/(i+2) - (i^2-i-4)/((i+1)(i+2)^2)].
    """
    if n < 0:
        raise DomainError(f"J_n needs n >= 0, got {n}")
    harmonic = 0.0
    terms = []
    for i in range(n + 1):
        if i > 0:
            harmonic += 1.0 / i
        terms.append(2 * harmonic / (i + 2) - (i * i - i - 4) / ((i + 1) * (i + 2) ** 2))
    return math.fsum(terms) / ((n + 1) * (n + 2))


def exp_max_integral(n: int, rtol: float = 1e-9, limit: int = 500) -> float:
    """integral_0^inf (1 - e^(-x))^n x / (e^x - 1 - x) dx, the Exp(1) E[phi_max]."""
    _require_agents(n)

    def integrand(x: float) -> float:
        if x <= 0:
            return 0.0
        excess = math.expm1(x) - x
        if excess == 0.0:
            return 0.0
        return (-math.expm1(-x)) ** n * x / excess

    return integrate_interval(integrand, 0.0, math.inf, rtol=rtol, limit=limit).value
