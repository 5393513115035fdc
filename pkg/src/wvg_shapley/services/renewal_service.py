"""
Renewal Service Layer

Builds conditioned laws from CLI specs and runs the renewal evaluators with
the configured guards, step sizes and worker count.
"""

import logging
from typing import List, Optional

from ..config.settings import Settings, settings as global_settings
from ..core import renewal
from ..core.distributions import ConditionedLaw, parse_distribution
from ..models.exceptions import ConfigurationError
from ..models.schemas import DecayReport, RenewalEstimate, RenewalMethod, RenewalSummary

logger = logging.getLogger(__name__)


class RenewalService:
    """Service for renewal-function estimates and residual decay checks."""

    def __init__(self, settings: Optional[Settings] = None, threads: Optional[int] = None):
        settings = settings or global_settings
        self.settings = settings
        self.threads = threads if threads is not None else settings.threads

    def law(self, dist_spec: str, condition: Optional[str] = None) -> ConditionedLaw:
        """Parse ``--dist`` and ``--cond`` into a conditioned law."""
        return ConditionedLaw.parse(parse_distribution(dist_spec), condition)

    def _mc_options(self) -> dict:
        return {
            "threads": self.threads,
            "block_size": self.settings.block_size,
            "max_draws": self.settings.renewal_max_draws,
        }

    def _check_reps(self, reps: int) -> None:
        if reps < 1:
            raise ConfigurationError(f"--reps must be >= 1, got {reps}")

    def summarize(
        self,
        law: ConditionedLaw,
        q_grid: List[float],
        method: RenewalMethod,
        reps: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> RenewalSummary:
        """m(Q), asymptote and residual over a grid."""
        method = RenewalMethod(method)
        logger.info(f"Renewal {method.value} for {law.describe} over {len(q_grid)} quotas")
        if method is RenewalMethod.MC:
            reps = self.settings.default_reps if reps is None else reps
            seed = self.settings.default_seed if seed is None else seed
            self._check_reps(reps)
            summary = renewal.renewal_summary(law, q_grid, method, reps, seed, **self._mc_options())
        else:
            summary = renewal.renewal_summary(
                law,
                q_grid,
                method,
                step=self.settings.convolution_step,
                mass_floor=self.settings.convolution_mass_floor,
            )

        worst = max(summary.points, key=lambda p: abs(p.residual))
        logger.info(f"Renewal summary: largest |residual| {abs(worst.residual):.3e} at Q={worst.q}")
        return summary

    def decay_report(
        self,
        law: ConditionedLaw,
        q_grid: List[float],
        method: RenewalMethod,
        reps: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> DecayReport:
        """Residual decay fit; needs an increasing grid of at least four quotas."""
        if len(q_grid) < 4:
            raise ConfigurationError("a decay fit needs at least 4 quotas")
        report = renewal.fit_residual_decay(self.summarize(law, q_grid, method, reps, seed))
        if report.noise_dominated:
            logger.info("All residuals are below the noise floor")
        elif not report.decay_consistent:
            logger.warning(f"Residuals do not decay: fitted slope {report.slope}")
        else:
            logger.info(f"Residual decay slope {report.slope}")
        return report

    def interval(
        self,
        law: ConditionedLaw,
        q: float,
        x: float,
        reps: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> RenewalEstimate:
        """Expected number of partial sums in [Q - x, Q)."""
        reps = self.settings.default_reps if reps is None else reps
        self._check_reps(reps)
        seed = self.settings.default_seed if seed is None else seed
        estimate = renewal.interval_count(law, q, x, reps, seed, **self._mc_options())
        logger.info(f"Interval count [{q - x}, {q}) for {law.describe}: {estimate.value!r} +/- {estimate.stderr:.2e}")
        return estimate
