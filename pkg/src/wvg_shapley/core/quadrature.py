"""
Adaptive quadrature helpers.

Wraps ``scipy.integrate.quad`` (QUADPACK Gauss-Kronrod with extrapolation) so
every integral in the toolkit reports its error estimate and fails loudly
when the requested relative tolerance is not reached.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

from scipy import integrate

from ..models.exceptions import ConvergenceError

logger = logging.getLogger(__name__)

# Absolute error accepted when the integral itself is (numerically) zero
ABS_FLOOR = 1e-15


@dataclass(frozen=True)
class QuadratureResult:
    """Integral value with QUADPACK's error estimate."""
    value: float
    abserr: float
    evaluations: int


def integrate_interval(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    rtol: float = 1e-9,
    limit: int = 500,
) -> QuadratureResult:
    """
    Integrate ``f`` over [lower, upper].

    An infinite ``upper`` is handled through t = lower - ln(1 - u), which maps
    the half line onto (0, 1) with Jacobian 1/(1 - u).

    Raises:
        ConvergenceError: If the error estimate exceeds rtol * |value|
    """
    if upper == lower:
        return QuadratureResult(0.0, 0.0, 0)

    if math.isinf(upper):
        def mapped(u: float) -> float:
            tail = -math.log1p(-u)
            return float(f(lower + tail)) / (1.0 - u)

        integrand, a, b = mapped, 0.0, 1.0
    else:
        integrand, a, b = (lambda t: float(f(t))), lower, upper

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        output = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=limit, full_output=1)

    value, abserr, info = output[0], output[1], output[2]
    tolerance = max(rtol * abs(value), ABS_FLOOR)
    if not math.isfinite(value) or abserr > tolerance:
        message = output[3] if len(output) > 3 else "tolerance not met"
        raise ConvergenceError(
            f"Quadrature on [{lower}, {upper}] reached error {abserr:.3e} "
            f"> tolerance {tolerance:.3e}: {message}"
        )

    logger.debug(f"quad [{lower}, {upper}] = {value!r} (err {abserr:.2e}, {info['neval']} evals)")
    return QuadratureResult(float(value), float(abserr), int(info["neval"]))


def integrate_unit(f: Callable[[float], float], rtol: float = 1e-9, limit: int = 500) -> QuadratureResult:
    """Integrate over the unit interval (probability-scale integrals)."""
    return integrate_interval(f, 0.0, 1.0, rtol=rtol, limit=limit)
