"""
Experiment Service Layer

Orchestrates Monte Carlo experiments and exact/sampled Shapley profiles with
configuration validation, sanity checks on the aggregated estimates and
run logging.
"""

import logging
import math
from typing import Any, Optional

from pydantic import ValidationError

from ..config.settings import Settings, settings as global_settings
from ..core import montecarlo, shapley
from ..models.exceptions import ConfigurationError, GameSizeError
from ..models.schemas import (
    Estimator,
    ExperimentConfig,
    ExperimentResult,
    Game,
    ShapleyMethod,
    ShapleyProfile,
)

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-9


class ExperimentService:
    """
    Service for simulation experiments over sampled weighted voting games.

    Holds the effective settings (seed and replication defaults, block size,
    enumerator guards) and the worker count used for block parallelism.
    """

    def __init__(self, settings: Optional[Settings] = None, threads: Optional[int] = None):
        settings = settings or global_settings
        self.settings = settings
        self.threads = threads if threads is not None else settings.threads

    def build_config(self, **params: Any) -> ExperimentConfig:
        """
        Validate experiment parameters, filling seed/reps/block size from settings.

        Raises:
            ConfigurationError: If any parameter fails validation
        """
        params.setdefault("block_size", self.settings.block_size)
        if params.get("seed") is None:
            params["seed"] = self.settings.default_seed
        if params.get("reps") is None:
            params["reps"] = self.settings.default_reps
        try:
            return ExperimentConfig(**params)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid experiment configuration: {e}") from e

    def run_experiment(self, cfg: ExperimentConfig) -> ExperimentResult:
        """Run one experiment and check the per-quota sums of the rank means."""
        if cfg.estimator is Estimator.EXACT and cfg.n > self.settings.exact_perm_max_n:
            raise GameSizeError(
                f"exact per-game estimator needs n <= {self.settings.exact_perm_max_n}, got n={cfg.n}"
            )

        logger.info(
            f"Starting experiment: dist={cfg.dist} n={cfg.n} model={cfg.model.value} "
            f"estimator={cfg.estimator.value} quotas={len(cfg.quota_grid)} reps={cfg.reps} seed={cfg.seed}"
        )
        result = montecarlo.run_experiment(cfg, threads=self.threads)

        for quota, improper in zip(cfg.quota_grid, result.improper):
            if improper:
                logger.warning(f"Quota {quota}: {improper} of {cfg.reps} sampled games were improper")

        if cfg.full_profile:
            self._check_rank_sums(result)

        logger.info(f"Finished experiment: dist={cfg.dist} n={cfg.n} seed={cfg.seed}")
        return result

    def profile_sweep(self, cfg: ExperimentConfig) -> ExperimentResult:
        """Same engine, reporting every rank."""
        if not cfg.full_profile:
            cfg = self.build_config(**{**cfg.model_dump(), "full_profile": True})
        return self.run_experiment(cfg)

    def _check_rank_sums(self, result: ExperimentResult) -> None:
        """Every replication has one pivot, so proper quotas sum to 1."""
        cfg = result.config
        for qi, quota in enumerate(cfg.quota_grid):
            total = math.fsum(result.means[qi])
            expected = 1.0 - result.improper[qi] / cfg.reps
            if cfg.estimator is Estimator.ONE_PERM and abs(total - expected) > SUM_TOLERANCE:
                logger.warning(f"Quota {quota}: rank means sum to {total!r}, expected {expected!r}")
            else:
                logger.debug(f"Quota {quota}: rank means sum to {total!r}")

    def shapley_profile(
        self,
        game: Game,
        method: ShapleyMethod,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> ShapleyProfile:
        """
        Shapley values of one game by the requested method.

        Raises:
            GameSizeError: If an exact enumerator's size guard is exceeded
            ConfigurationError: If a sampled profile is requested without samples
        """
        if not game.is_proper:
            logger.warning(f"Quota {game.quota} is improper for total weight {game.total_weight}")

        if method is ShapleyMethod.EXACT_PERM:
            profile = shapley.shapley_exact_perm(game, max_n=self.settings.exact_perm_max_n)
        elif method is ShapleyMethod.EXACT_SUBSET:
            profile = shapley.shapley_exact_subset(game, max_n=self.settings.exact_subset_max_n)
        else:
            if samples is None or samples < 1:
                raise ConfigurationError("sampled Shapley values need --samples >= 1")
            profile = shapley.shapley_sample_perms(
                game,
                samples,
                self.settings.default_seed if seed is None else seed,
                threads=self.threads,
                block_size=self.settings.block_size,
            )

        logger.info(f"Shapley profile ({profile.method.value}) for n={game.n}, q={game.quota}")
        return profile
