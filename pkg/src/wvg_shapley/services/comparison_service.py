"""
Comparison Service Layer

Joins simulation estimates with theoretical predictions, and runs the preset
figure batches that emit plot-ready datasets.
"""

import logging
from typing import Dict, List, Optional, Sequence

from ..config.settings import Settings, settings as global_settings
from ..core import theory
from ..core.distributions import parse_distribution
from ..models.exceptions import ConfigurationError
from ..models.schemas import (
    ComparisonReport,
    ComparisonRow,
    Estimator,
    ExperimentResult,
    FigureName,
    FigureRow,
    PredictionTarget,
    RankClass,
    WeightModel,
    parse_quota_grid,
)
from .experiment_service import ExperimentService
from .prediction_service import PredictionService, scaled_reference

logger = logging.getLogger(__name__)

# Largest |natural - normalized| gap of n*E[phi_max] reported without a warning
MODEL_GAP_TOLERANCE = 0.05
# In-range deviations beyond this many standard errors are logged
DEVIATION_WARN_SIGMA = 5.0

FIG1_GRID = "0.05:0.95:0.05"
FIG1_SIZES = (10, 20)
FIG2_SIZES = (5, 10, 20, 50, 100, 200)
FIG3_SIZE = 100
HALF_QUOTA = 0.5


def _rank_class(rank: int, n: int) -> RankClass:
    if rank == n:
        return RankClass.MAX
    if rank == 1:
        return RankClass.MIN
    return RankClass.P


class ComparisonService:
    """Service for simulation-versus-theory comparisons and figure recipes."""

    def __init__(self, settings: Optional[Settings] = None, threads: Optional[int] = None):
        settings = settings or global_settings
        self.settings = settings
        self.experiments = ExperimentService(settings, threads)
        self.predictions = PredictionService(settings)

    def _models(self, model: str) -> List[WeightModel]:
        if model == "both":
            return [WeightModel.NORMALIZED, WeightModel.NATURAL]
        try:
            return [WeightModel(model)]
        except ValueError as e:
            raise ConfigurationError(f"Unknown weight model '{model}'") from e

    def _simulate(
        self,
        dist: str,
        n: int,
        model: WeightModel,
        grid: List[float],
        reps: Optional[int],
        seed: Optional[int],
        estimator: Estimator = Estimator.ONE_PERM,
        full_profile: bool = False,
    ) -> ExperimentResult:
        """Run on normalized quotas; the natural model uses Q = q * n * E[X]."""
        quotas = grid
        if model is WeightModel.NATURAL:
            mean = parse_distribution(dist).mean
            quotas = [q * n * mean for q in grid]
        cfg = self.experiments.build_config(
            dist=dist,
            n=n,
            model=model,
            quota_grid=quotas,
            reps=reps,
            seed=seed,
            estimator=estimator,
            full_profile=full_profile,
        )
        return self.experiments.run_experiment(cfg)

    def _predicted(self, dist: str, n: int, ranks: Sequence[int]) -> Dict[int, float]:
        values = {}
        for rank in ranks:
            if rank == n:
                values[rank] = self.predictions.predict(dist, n, PredictionTarget.MAX).value
            elif rank == 1:
                values[rank] = self.predictions.predict(dist, n, PredictionTarget.MIN).value
            else:
                values[rank] = self.predictions.predict(dist, n, PredictionTarget.RANK, p=rank / n).value
        return values

    def compare(
        self,
        dist: str,
        n_values: Sequence[int],
        quota_grid,
        reps: Optional[int] = None,
        seed: Optional[int] = None,
        model: str = "normalized",
        estimator: Estimator = Estimator.ONE_PERM,
        full_profile: bool = False,
    ) -> ComparisonReport:
        """
        Simulated against predicted E[phi_rank] on normalized quotas.

        Statistical deviations are reported, never raised.

        Raises:
            ConfigurationError: If the grid, sizes or experiment parameters are invalid
        """
        try:
            grid = parse_quota_grid(quota_grid) if isinstance(quota_grid, str) else [float(q) for q in quota_grid]
        except ValueError as e:
            raise ConfigurationError(f"Invalid quota grid: {e}") from e
        if not n_values or min(n_values) < 2:
            raise ConfigurationError("compare needs every n >= 2")
        models = self._models(model)
        mean = parse_distribution(dist).mean

        rows: List[ComparisonRow] = []
        gaps: List[float] = []
        for n in n_values:
            scaled_max: Dict[WeightModel, float] = {}
            predicted: Optional[Dict[int, float]] = None
            for weight_model in models:
                result = self._simulate(dist, n, weight_model, grid, reps, seed, estimator, full_profile)
                if predicted is None:
                    predicted = self._predicted(dist, n, result.ranks)
                reps_used = result.reps
                for qi, q in enumerate(grid):
                    for rank in result.ranks:
                        rank_class = _rank_class(rank, n)
                        target = PredictionTarget.MIN if rank_class is RankClass.MIN else PredictionTarget.MAX
                        low, high = theory.asymptotic_quota_range(n, target, mean=mean)
                        simulated = result.mean_at(qi, rank)
                        stderr = result.stderr_at(qi, rank)
                        rows.append(
                            ComparisonRow(
                                quota=q,
                                rank_class=rank_class,
                                simulated=simulated,
                                stderr=stderr,
                                predicted=predicted[rank],
                                deviation_sigma=(simulated - predicted[rank]) / max(stderr, 1.0 / reps_used),
                                n=n,
                                model=weight_model,
                                rank=rank,
                                in_range=low <= q <= high,
                            )
                        )
                scaled_max[weight_model] = n * result.mean_at(0, n)

            if len(scaled_max) == 2:
                gap = scaled_max[WeightModel.NATURAL] - scaled_max[WeightModel.NORMALIZED]
                gaps.append(gap)
                if abs(gap) > MODEL_GAP_TOLERANCE:
                    logger.warning(f"n={n}: natural and normalized n*E[phi_max] differ by {gap:.4f} at q={grid[0]}")
                else:
                    logger.info(f"n={n}: model gap {gap:.4f} at q={grid[0]}")

        in_range = [r for r in rows if r.in_range]
        max_abs_sigma = max((abs(r.deviation_sigma) for r in in_range), default=0.0)
        breaches = sum(1 for r in in_range if abs(r.deviation_sigma) > DEVIATION_WARN_SIGMA)
        if breaches:
            logger.warning(f"{breaches} in-range rows deviate by more than {DEVIATION_WARN_SIGMA} sigma")

        model_gap = max(gaps, key=abs) if gaps else None
        summary = (
            f"compare {dist} n={','.join(str(n) for n in n_values)}: {len(rows)} rows, "
            f"{len(in_range)} in range, max |deviation| {max_abs_sigma:.2f} sigma"
        )
        if model_gap is not None:
            summary += f", model gap {model_gap:.4f}"
        logger.info(summary)
        return ComparisonReport(rows=rows, max_abs_sigma=max_abs_sigma, model_gap=model_gap, summary=summary)

    def figure_recipe(
        self,
        name: FigureName,
        reps: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> List[FigureRow]:
        """
        Run a preset batch and return its plot-ready rows.

        Every sub-run uses the same seed, so each row can be reproduced with
        a single ``simulate`` call.

        Raises:
            ConfigurationError: If the recipe name is unknown
        """
        try:
            name = FigureName(name)
        except ValueError as e:
            raise ConfigurationError(f"Unknown figure recipe '{name}'") from e

        logger.info(f"Figure recipe {name.value} (reps={reps}, seed={seed})")
        if name is FigureName.FIG1:
            rows = self._quota_sweep_rows(reps, seed)
        elif name is FigureName.FIG2:
            rows = self._size_sweep_rows(reps, seed)
        else:
            rows = self._profile_rows(reps, seed)
        logger.info(f"Figure recipe {name.value}: {len(rows)} rows")
        return rows

    def _row(
        self,
        figure: FigureName,
        result: ExperimentResult,
        qi: int,
        rank: int,
        scale: float,
        predicted_scaled: Optional[float],
    ) -> FigureRow:
        cfg = result.config
        mean = result.mean_at(qi, rank)
        stderr = result.stderr_at(qi, rank)
        return FigureRow(
            figure=figure,
            dist=cfg.dist,
            model=cfg.model,
            n=cfg.n,
            quota=cfg.quota_grid[qi],
            rank_class=_rank_class(rank, cfg.n),
            rank=rank,
            p=rank / cfg.n,
            mean=mean,
            stderr=stderr,
            scale=scale,
            scaled_mean=mean * scale,
            scaled_stderr=stderr * scale,
            predicted_scaled=predicted_scaled,
        )

    def _quota_sweep_rows(self, reps: Optional[int], seed: Optional[int]) -> List[FigureRow]:
        dist = "uniform:0,1"
        grid = parse_quota_grid(FIG1_GRID)
        rows = []
        for n in FIG1_SIZES:
            result = self._simulate(dist, n, WeightModel.NORMALIZED, grid, reps, seed)
            predicted_max = n * self.predictions.predict(dist, n, PredictionTarget.MAX).value
            predicted_min = n * self.predictions.predict(dist, n, PredictionTarget.MIN).value
            for qi in range(len(grid)):
                rows.append(self._row(FigureName.FIG1, result, qi, n, n, predicted_max))
                rows.append(self._row(FigureName.FIG1, result, qi, 1, n, predicted_min))
        return rows

    def _size_sweep_rows(self, reps: Optional[int], seed: Optional[int]) -> List[FigureRow]:
        dist = "exp:1"
        d = parse_distribution(dist)
        rows = []
        for n in FIG2_SIZES:
            result = self._simulate(dist, n, WeightModel.NORMALIZED, [HALF_QUOTA], reps, seed)
            rows.append(self._row(FigureName.FIG2, result, 0, n, n, scaled_reference(d, n, PredictionTarget.MAX)))
            rows.append(self._row(FigureName.FIG2, result, 0, 1, n * n, scaled_reference(d, n, PredictionTarget.MIN)))
        return rows

    def _profile_rows(self, reps: Optional[int], seed: Optional[int]) -> List[FigureRow]:
        n = FIG3_SIZE
        rows = []
        for dist in ("uniform:0,1", "exp:1"):
            d = parse_distribution(dist)
            result = self._simulate(dist, n, WeightModel.NORMALIZED, [HALF_QUOTA], reps, seed, full_profile=True)
            top = n * self.predictions.predict(dist, n, PredictionTarget.MAX).value
            for rank in result.ranks:
                predicted = top if rank == n else theory.predict_rank_limit(d, rank / n)
                rows.append(self._row(FigureName.FIG3, result, 0, rank, n, predicted))
        return rows
