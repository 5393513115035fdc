"""
Pydantic schemas for run configuration, results and emitted records.

Provides type-safe validation for everything that crosses a module or process
boundary: experiment configs, Shapley profiles, predictions, renewal
summaries, comparison rows, manifests and the CSV record layouts.
"""

import math
import re
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Enums
class Unbounded(str, Enum):
    """Marker for an infinite support bound or limit."""
    INFINITY = "inf"


class ExtremeKind(str, Enum):
    """Extreme order statistic of n draws."""
    MAX = "max"
    MIN = "min"


class ShapleyMethod(str, Enum):
    """How a Shapley profile was obtained."""
    EXACT_PERM = "exact_perm"
    EXACT_SUBSET = "exact_subset"
    SAMPLED_PERM = "sampled_perm"


class WeightModel(str, Enum):
    """Natural (absolute quota) or normalized (unit-sum weights) i.i.d. model."""
    NATURAL = "natural"
    NORMALIZED = "normalized"


class Estimator(str, Enum):
    """Per-replication estimator used by the experiment engine."""
    ONE_PERM = "one_perm"
    EXACT = "exact"
    CONDITIONAL = "conditional"


class PredictionForm(str, Enum):
    QUADRATURE = "quadrature"
    SERIES = "series"
    ASYMPTOTIC = "asymptotic"
    LIMIT = "limit"


class PredictionTarget(str, Enum):
    MAX = "max"
    MIN = "min"
    RANK = "rank"


class PredictionMethod(str, Enum):
    """Evaluation route requested for a prediction."""
    AUTO = "auto"
    SERIES = "series"
    QUADRATURE = "quadrature"
    ASYMPTOTIC = "asymptotic"


class RankClass(str, Enum):
    MAX = "max"
    MIN = "min"
    P = "p"


class RenewalMethod(str, Enum):
    MC = "mc"
    CONVOLVE = "convolve"


class FigureName(str, Enum):
    FIG1 = "fig1"
    FIG2 = "fig2"
    FIG3 = "fig3"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


_GRID_RANGE = re.compile(r"^\s*([^:]+):([^:]+):([^:]+)\s*$")


def parse_quota_grid(text: str) -> List[float]:
    """
    Parse ``start:stop:step`` (inclusive) or a comma list into quota values.

    Range points are start + i*step rounded to 12 decimals so that
    ``0.05:0.95:0.05`` yields exactly 0.05, 0.1, ..., 0.95.
    """
    text = text.strip()
    match = _GRID_RANGE.match(text)
    if match:
        start, stop, step = (float(part) for part in match.groups())
        if not step > 0:
            raise ValueError(f"grid step must be positive in '{text}'")
        if stop < start:
            raise ValueError(f"grid stop below start in '{text}'")
        count = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(count + 1)]
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError("empty quota grid")
    return values


# Base schemas with common configuration
class BaseSchema(BaseModel):
    """Base schema with common configuration."""
    model_config = ConfigDict(from_attributes=True)


class CsvRecord(BaseSchema):
    """Base for strict CSV row layouts; blank cells read as missing values."""
    model_config = ConfigDict(from_attributes=True, allow_inf_nan=False, extra="forbid", populate_by_name=True)

    @model_validator(mode="before")
    @classmethod
    def blank_cells_to_none(cls, data: Any) -> Any:
        if isinstance(data, dict):
            return {k: (None if v == "" else v) for k, v in data.items()}
        return data

    @classmethod
    def columns(cls) -> List[str]:
        """Column names in emission order."""
        return [field.alias or name for name, field in cls.model_fields.items()]


# Game schemas
class Game(BaseSchema):
    """A weighted voting game: sorted positive weights and a quota."""
    model_config = ConfigDict(from_attributes=True, frozen=True)

    weights: Tuple[float, ...] = Field(..., min_length=1, description="Weights, sorted non-decreasing")
    quota: float = Field(..., description="Quota q; proper when 0 < q <= total weight")

    @field_validator("weights", mode="before")
    @classmethod
    def sort_weights(cls, v):
        """Sort weights ascending and reject non-positive entries."""
        values = [float(w) for w in v]
        if any(not math.isfinite(w) or w <= 0 for w in values):
            raise ValueError("weights must be finite and positive")
        return tuple(sorted(values))

    @field_validator("quota")
    @classmethod
    def finite_quota(cls, v):
        if not math.isfinite(v):
            raise ValueError("quota must be finite")
        return v

    @classmethod
    def from_literal(cls, weights: str, quota: float) -> "Game":
        """Build a game from the CLI literal ``1,2,3``."""
        return cls(weights=[part for part in weights.split(",") if part.strip()], quota=quota)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @property
    def is_proper(self) -> bool:
        """True when exactly one agent is pivotal in every ordering."""
        return 0 < self.quota <= self.total_weight


class ShapleyProfile(BaseSchema):
    """Per-rank Shapley values (rank 1 = lowest weight) with optional standard errors."""
    method: ShapleyMethod
    quota: float
    values: List[float]
    stderr: Optional[List[float]] = None
    samples: Optional[int] = Field(None, ge=1, description="Permutations drawn for sampled profiles")
    proper: bool = True

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def total(self) -> float:
        return math.fsum(self.values)

    def rows(self) -> List[Dict[str, Any]]:
        """CSV rows ``rank,value,stderr``."""
        return [
            {
                "rank": rank,
                "value": value,
                "stderr": "" if self.stderr is None else self.stderr[rank - 1],
            }
            for rank, value in enumerate(self.values, start=1)
        ]

    def to_document(self) -> Dict[str, Any]:
        """JSON form ``{method, quota, values[], stderr[]?, proper}``."""
        doc: Dict[str, Any] = {"method": self.method.value, "quota": self.quota, "values": self.values}
        if self.stderr is not None:
            doc["stderr"] = self.stderr
        doc["proper"] = self.proper
        return doc


# Experiment schemas
class ExperimentConfig(BaseSchema):
    """Configuration of one Monte Carlo experiment."""
    dist: str = Field(..., description="Distribution spec, e.g. uniform:0,1 or exp:1")
    n: int = Field(..., ge=1, description="Number of agents")
    model: WeightModel = Field(WeightModel.NORMALIZED, description="Weight model")
    quota_grid: List[float] = Field(..., min_length=1, description="Normalized q or absolute Q values")
    reps: int = Field(..., ge=1, description="Replications (sampled games)")
    seed: int = Field(..., ge=0, lt=2**64, description="Root seed")
    estimator: Estimator = Field(Estimator.ONE_PERM, description="Per-replication estimator")
    full_profile: bool = Field(False, description="Report every rank instead of max and min")
    block_size: int = Field(2**14, ge=1, description="Replications per substream block")

    @field_validator("dist", mode="before")
    @classmethod
    def normalize_dist(cls, v):
        """Canonicalize the spec; malformed specs fail validation."""
        from ..core.distributions import parse_distribution

        try:
            return parse_distribution(str(v)).spec
        except Exception as e:
            raise ValueError(str(e)) from e

    @field_validator("quota_grid", mode="before")
    @classmethod
    def parse_grid(cls, v):
        if isinstance(v, str):
            return parse_quota_grid(v)
        return v

    @model_validator(mode="after")
    def check_consistency(self):
        grid = self.quota_grid
        if any(not math.isfinite(q) for q in grid):
            raise ValueError("quota grid must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("quota grid must be strictly increasing")
        if self.model is WeightModel.NORMALIZED and not (grid[0] > 0 and grid[-1] < 1):
            raise ValueError("normalized quotas must lie in (0, 1)")
        if self.model is WeightModel.NATURAL and grid[0] <= 0:
            raise ValueError("natural quotas must be positive")
        if self.estimator is Estimator.EXACT and self.n > 11:
            raise ValueError("the exact per-game estimator needs n <= 11")
        if self.estimator is Estimator.CONDITIONAL:
            if self.model is not WeightModel.NATURAL:
                raise ValueError("the conditional estimator needs the natural model")
            if self.full_profile:
                raise ValueError("the conditional estimator reports the max and min ranks only")
        return self

    @property
    def ranks(self) -> List[int]:
        """1-based ranks the run reports."""
        if self.full_profile:
            return list(range(1, self.n + 1))
        return [1] if self.n == 1 else [1, self.n]


class ExperimentResult(BaseSchema):
    """Per (quota, rank) estimates of E[phi_rank] for a completed run."""
    config: ExperimentConfig
    ranks: List[int]
    means: List[List[float]] = Field(..., description="means[quota_index][rank_index]")
    stderr: List[List[float]]
    improper: List[int] = Field(..., description="Improper replications per quota")

    @property
    def reps(self) -> int:
        return self.config.reps

    def mean_at(self, quota_index: int, rank: int) -> float:
        return self.means[quota_index][self.ranks.index(rank)]

    def stderr_at(self, quota_index: int, rank: int) -> float:
        return self.stderr[quota_index][self.ranks.index(rank)]

    def rows(self) -> List[Dict[str, Any]]:
        """CSV rows ``quota,rank,mean,stderr,reps,n,model,dist,seed``."""
        cfg = self.config
        return [
            {
                "quota": quota,
                "rank": rank,
                "mean": self.means[qi][ri],
                "stderr": self.stderr[qi][ri],
                "reps": cfg.reps,
                "n": cfg.n,
                "model": cfg.model.value,
                "dist": cfg.dist,
                "seed": cfg.seed,
            }
            for qi, quota in enumerate(cfg.quota_grid)
            for ri, rank in enumerate(self.ranks)
        ]


# Theory schemas
class Prediction(BaseSchema):
    """A theoretical value with the route that produced it."""
    dist: str
    target: PredictionTarget
    value: float
    form: PredictionForm
    n: Optional[int] = Field(None, description="Agent count; None for n -> infinity")
    p: Optional[float] = None
    terms: Optional[int] = Field(None, description="Series truncation point")
    error_estimate: Optional[float] = Field(None, description="Quadrature or series error estimate")
    quota_range: Optional[Tuple[float, float]] = Field(None, description="Normalized quotas the value covers")

    def row(self) -> Dict[str, Any]:
        """CSV row ``dist,n,target,p,value,form,terms,error_estimate``."""
        return {
            "dist": self.dist,
            "n": "inf" if self.n is None else self.n,
            "target": self.target.value,
            "p": "" if self.p is None else self.p,
            "value": self.value,
            "form": self.form.value,
            "terms": "" if self.terms is None else self.terms,
            "error_estimate": "" if self.error_estimate is None else self.error_estimate,
        }


class LimitValues(BaseSchema):
    """Limits of n*E[phi] for the top and bottom ranks."""
    limit_max: Union[float, Unbounded]
    limit_min: float


class ExponentialFormulas(BaseSchema):
    """Closed forms for Exp(1) extreme-rank predictions."""
    n: int
    harmonic_integral: float
    min_integral: float
    max_asymptotic: float
    min_asymptotic: float


# Renewal schemas
class RenewalEstimate(BaseSchema):
    """Monte Carlo estimate of a renewal count."""
    value: float
    stderr: float
    reps: int


class RenewalPoint(BaseSchema):
    q: float
    m_hat: float
    stderr: Optional[float] = None
    asymptote: float
    residual: float

    def row(self) -> Dict[str, Any]:
        return {
            "Q": self.q,
            "m_hat": self.m_hat,
            "stderr": "" if self.stderr is None else self.stderr,
            "asymptote": self.asymptote,
            "residual": self.residual,
        }


class RenewalSummary(BaseSchema):
    """Renewal function estimates against the linear asymptote."""
    law: str
    method: RenewalMethod
    mean: float = Field(..., description="E[Y]")
    second_moment: float = Field(..., description="E[Y^2]")
    reps: Optional[int] = None
    seed: Optional[int] = None
    points: List[RenewalPoint]

    @property
    def grid(self) -> List[float]:
        return [p.q for p in self.points]

    @property
    def m_estimates(self) -> List[float]:
        return [p.m_hat for p in self.points]

    @property
    def residuals(self) -> List[float]:
        return [p.residual for p in self.points]


class DecayReport(BaseSchema):
    """Residual table with the fitted log-linear decay slope."""
    summary: RenewalSummary
    resolvable: List[float] = Field(default_factory=list, description="Q values with a resolvable residual")
    slope: Optional[float] = None
    decay_consistent: bool
    noise_dominated: bool


# Comparison and figure schemas
class ComparisonRow(CsvRecord):
    """Compare CSV layout."""
    quota: float
    rank_class: RankClass
    simulated: float
    stderr: float = Field(..., ge=0)
    predicted: float
    deviation_sigma: float
    n: int = Field(..., ge=1)
    model: WeightModel
    rank: int = Field(..., ge=1)
    in_range: bool


class ComparisonReport(BaseSchema):
    rows: List[ComparisonRow]
    max_abs_sigma: float
    model_gap: Optional[float] = Field(
        None, description="Natural minus normalized n*E[phi_max] at the first quota, largest over n"
    )
    summary: str


class FigureRow(CsvRecord):
    """Plot-ready figure CSV layout."""
    figure: FigureName
    dist: str
    model: WeightModel
    n: int = Field(..., ge=1)
    quota: float
    rank_class: RankClass
    rank: int = Field(..., ge=1)
    p: float
    mean: float
    stderr: float = Field(..., ge=0)
    scale: float
    scaled_mean: float
    scaled_stderr: float = Field(..., ge=0)
    predicted_scaled: Optional[float] = None


# CSV record layouts for the remaining outputs
class SimulationRecord(CsvRecord):
    quota: float
    rank: int = Field(..., ge=1)
    mean: float = Field(..., ge=0, le=1)
    stderr: float = Field(..., ge=0)
    reps: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    model: WeightModel
    dist: str
    seed: int = Field(..., ge=0)


class ProfileRecord(CsvRecord):
    rank: int = Field(..., ge=1)
    value: float
    stderr: Optional[float] = Field(None, ge=0)


class PredictionRecord(CsvRecord):
    dist: str
    n: Optional[int] = None
    target: PredictionTarget
    p: Optional[float] = None
    value: float
    form: PredictionForm
    terms: Optional[int] = None
    error_estimate: Optional[float] = None

    @field_validator("n", mode="before")
    @classmethod
    def infinite_n(cls, v):
        return None if v == "inf" else v


class RenewalRecord(CsvRecord):
    q: float = Field(..., alias="Q")
    m_hat: float = Field(..., ge=0)
    stderr: Optional[float] = Field(None, ge=0)
    asymptote: float
    residual: float


# Manifest
class RunManifest(BaseSchema):
    """Sidecar describing a run well enough to replay it bit-identically."""
    subcommand: str
    parameters: Dict[str, Any]
    settings: Dict[str, Any]
    seed: Optional[int] = None
    version: str
    started_at: datetime
    finished_at: datetime
    outputs: List[str] = Field(default_factory=list)
    threads: Optional[int] = Field(None, description="Informational; results never depend on it")
