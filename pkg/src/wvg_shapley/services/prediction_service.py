"""
Prediction Service Layer

Chooses the evaluation route for a theoretical prediction (series,
quadrature, closed form, asymptotic or limit) and falls back to quadrature
when a series does not converge.
"""

import logging
import math
from typing import Optional

import numpy as np

from ..config.settings import Settings, settings as global_settings
from ..core import theory
from ..core.distributions import ExponentialWeights, UniformWeights, WeightDistribution, parse_distribution
from ..models.exceptions import ConfigurationError, ConvergenceError
from ..models.schemas import (
    LimitValues,
    Prediction,
    PredictionForm,
    PredictionMethod,
    PredictionTarget,
)

logger = logging.getLogger(__name__)


class PredictionService:
    """Service for closed-form, series and quadrature predictions."""

    def __init__(self, settings: Optional[Settings] = None):
        settings = settings or global_settings
        self.settings = settings

    def predict(
        self,
        dist_spec: str,
        n: Optional[int],
        target: PredictionTarget,
        p: Optional[float] = None,
        method: PredictionMethod = PredictionMethod.AUTO,
    ) -> Prediction:
        """
        Evaluate one prediction.

        Raises:
            ConfigurationError: If the method does not apply to the target/law
            ConvergenceError: If quadrature fails to meet its tolerance
        """
        d = parse_distribution(dist_spec)
        target = PredictionTarget(target)
        method = PredictionMethod(method)

        if target is PredictionTarget.RANK:
            prediction = self._predict_rank(d, n, p, method)
        else:
            if n is None:
                raise ConfigurationError(f"--n is required for the {target.value} target")
            prediction = self._predict_extreme(d, n, target, method)

        logger.info(
            f"Prediction {target.value} for {d.spec} n={n} p={p}: {prediction.value!r} "
            f"({prediction.form.value})"
        )
        return prediction

    def limit_values(self, dist_spec: str) -> LimitValues:
        return theory.limit_values(parse_distribution(dist_spec))

    def _quadrature(self, d: WeightDistribution, n: int, target: PredictionTarget) -> Prediction:
        rtol, limit = self.settings.quad_rtol, self.settings.quad_limit
        if target is PredictionTarget.MAX:
            return theory.predict_max_expected(d, n, rtol=rtol, limit=limit)
        return theory.predict_min_expected(d, n, rtol=rtol, limit=limit)

    def _series(self, d: WeightDistribution, n: int, target: PredictionTarget) -> Prediction:
        if isinstance(d, UniformWeights):
            tol, cap = self.settings.series_tol, self.settings.series_max_terms
            if target is PredictionTarget.MAX:
                return theory.uniform_series_max(d.a, d.b, n, tol=tol, max_terms=cap)
            return theory.uniform_series_min(d.a, d.b, n, tol=tol, max_terms=cap)

        if isinstance(d, ExponentialWeights) and target is PredictionTarget.MIN:
            # scale invariant: Exp(rate) gives the same values as Exp(1)
            return Prediction(
                dist=d.spec,
                target=target,
                value=theory.exp_min_integral(n),
                form=PredictionForm.SERIES,
                n=n,
                quota_range=theory.asymptotic_quota_range(n, target, mean=d.mean),
            )
        raise ConfigurationError(f"no series form for the {target.value} rank of {d.spec}")

    def _asymptotic(self, d: WeightDistribution, n: int, target: PredictionTarget) -> Prediction:
        if isinstance(d, ExponentialWeights):
            formulas = theory.exp_formulas(n)
            value = formulas.max_asymptotic if target is PredictionTarget.MAX else formulas.min_asymptotic
        else:
            limits = theory.limit_values(d)
            scaled = limits.limit_max if target is PredictionTarget.MAX else limits.limit_min
            value = float(scaled) / n
        return Prediction(dist=d.spec, target=target, value=value, form=PredictionForm.ASYMPTOTIC, n=n)

    def _predict_extreme(
        self, d: WeightDistribution, n: int, target: PredictionTarget, method: PredictionMethod
    ) -> Prediction:
        if method is PredictionMethod.QUADRATURE:
            return self._quadrature(d, n, target)
        if method is PredictionMethod.SERIES:
            return self._series(d, n, target)
        if method is PredictionMethod.ASYMPTOTIC:
            return self._asymptotic(d, n, target)

        # auto: series where one exists, quadrature otherwise or on non-convergence
        try:
            return self._series(d, n, target)
        except ConfigurationError:
            return self._quadrature(d, n, target)
        except ConvergenceError as e:
            logger.warning(f"Series did not converge ({e}); falling back to quadrature")
            return self._quadrature(d, n, target)

    def _predict_rank(
        self, d: WeightDistribution, n: Optional[int], p: Optional[float], method: PredictionMethod
    ) -> Prediction:
        if p is None:
            raise ConfigurationError("--p is required for the rank target")
        if method is PredictionMethod.SERIES:
            raise ConfigurationError("no series form for rank-p predictions")

        use_limit = method is PredictionMethod.ASYMPTOTIC or (method is PredictionMethod.AUTO and n is None)
        if use_limit:
            return Prediction(dist=d.spec, target=PredictionTarget.RANK, value=theory.predict_rank_limit(d, p),
                              form=PredictionForm.LIMIT, n=None, p=p)

        if n is None:
            raise ConfigurationError("--n is required for the finite-n rank predictor")
        return theory.predict_rank_expected(
            d, n, p, rtol=self.settings.quad_rtol, limit=self.settings.quad_limit
        )


def scaled_reference(d: WeightDistribution, n: int, target: PredictionTarget) -> Optional[float]:
    """Reference curve of the exponential figure: ln n + gamma for max (x n), 1 for min (x n^2)."""
    if not isinstance(d, ExponentialWeights):
        return None
    if target is PredictionTarget.MAX:
        return math.log(n) + float(np.euler_gamma)
    return 1.0
