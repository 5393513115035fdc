"""
Weight distributions and their conditioned forms.

Provides the two built-in weight laws (uniform and exponential), the
conditioned laws X_{<=x}, X_{>=x} and their p-mixture, and the order
statistic densities the theory module integrates against. Every object is
immutable, so a single instance can be shared by worker threads.
"""

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import special, stats

from ..models.exceptions import DistributionSpecError, DomainError
from ..models.schemas import ExtremeKind, Unbounded

ArrayLike = Union[float, np.ndarray]
Density = Callable[[ArrayLike], np.ndarray]

_SPEC_PATTERN = re.compile(r"^\s*(uniform|exp)\s*:\s*(.+?)\s*$", re.IGNORECASE)


def _number(x: float) -> str:
    """Shortest round-trip text for a parameter (``1.0`` -> ``1``)."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


@dataclass(frozen=True)
class Support:
    """Closed support [lower, upper] of a weight law; upper may be unbounded."""
    lower: float
    upper: Union[float, Unbounded]

    @property
    def is_bounded(self) -> bool:
        return not isinstance(self.upper, Unbounded)

    @property
    def upper_value(self) -> float:
        """Numeric upper bound, ``math.inf`` for an unbounded support."""
        return math.inf if isinstance(self.upper, Unbounded) else float(self.upper)


class WeightDistribution(ABC):
    """
    Continuous weight law with exponentially decaying density.

    Subclasses supply the density, distribution function, quantiles and the
    truncated moments E[X^k | X <= x] and E[X^k | X >= x] in closed form.
    """

    kind: str = ""

    @property
    @abstractmethod
    def support(self) -> Support:
        """Support bounds (chi_min, chi_max)."""

    @property
    @abstractmethod
    def mean(self) -> float:
        """E[X]."""

    @property
    @abstractmethod
    def second_moment(self) -> float:
        """E[X^2]."""

    @property
    @abstractmethod
    def spec(self) -> str:
        """Spec string accepted by :func:`parse_distribution`."""

    @abstractmethod
    def pdf(self, t: ArrayLike) -> np.ndarray:
        """Density, zero outside the support."""

    @abstractmethod
    def cdf(self, t: ArrayLike) -> np.ndarray:
        """Pr[X <= t]."""

    @abstractmethod
    def sf(self, t: ArrayLike) -> np.ndarray:
        """Pr[X >= t]."""

    @abstractmethod
    def ppf(self, u: ArrayLike) -> np.ndarray:
        """Quantile function F^{-1}(u)."""

    @abstractmethod
    def isf(self, s: ArrayLike) -> np.ndarray:
        """Inverse survival function: the t with Pr[X >= t] = s."""

    @abstractmethod
    def moment_below(self, x: float, k: int) -> float:
        """E[X^k | X <= x] for x inside the support."""

    @abstractmethod
    def moment_above(self, x: float, k: int) -> float:
        """E[X^k | X >= x] for x inside the support."""

    @abstractmethod
    def decay_envelope(self) -> Tuple[float, float]:
        """Constants (C, lambda) with f(t) <= C * exp(-lambda * t)."""

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw i.i.d. weights; inverse-CDF unless a subclass has a faster path."""
        return self.ppf(rng.random(size))

    def mean_below(self, x: float) -> float:
        """
        E[X | X <= x].

        Raises:
            DomainError: If Pr[X <= x] = 0
        """
        if x <= self.support.lower or float(self.cdf(x)) <= 0.0:
            raise DomainError(f"{self.spec}: Pr[X <= {x}] = 0, cannot condition below")
        return self.moment_below(x, 1)

    def mean_above(self, x: float) -> float:
        """
        E[X | X >= x].

        Raises:
            DomainError: If Pr[X >= x] = 0 in the sense of x at or above chi_max
        """
        if x >= self.support.upper_value or float(self.sf(x)) <= 0.0:
            raise DomainError(f"{self.spec}: Pr[X >= {x}] = 0, cannot condition above")
        return self.moment_above(max(x, self.support.lower), 1)

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True)
class UniformWeights(WeightDistribution):
    """U(a, b) with 0 <= a < b."""
    a: float
    b: float

    kind = "uniform"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DistributionSpecError("uniform bounds must be finite")
        if self.a < 0 or self.b <= self.a:
            raise DistributionSpecError(f"uniform requires 0 <= a < b, got a={self.a}, b={self.b}")

    @property
    def support(self) -> Support:
        return Support(self.a, self.b)

    @property
    def mean(self) -> float:
        return (self.a + self.b) / 2

    @property
    def second_moment(self) -> float:
        return (self.a * self.a + self.a * self.b + self.b * self.b) / 3

    @property
    def spec(self) -> str:
        return f"uniform:{_number(self.a)},{_number(self.b)}"

    @property
    def width(self) -> float:
        return self.b - self.a

    def pdf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.a) & (t <= self.b), 1.0 / self.width, 0.0)

    def cdf(self, t: ArrayLike) -> np.ndarray:
        return np.clip((np.asarray(t, dtype=float) - self.a) / self.width, 0.0, 1.0)

    def sf(self, t: ArrayLike) -> np.ndarray:
        return np.clip((self.b - np.asarray(t, dtype=float)) / self.width, 0.0, 1.0)

    def ppf(self, u: ArrayLike) -> np.ndarray:
        return self.a + np.asarray(u, dtype=float) * self.width

    def isf(self, s: ArrayLike) -> np.ndarray:
        return self.b - np.asarray(s, dtype=float) * self.width

    @staticmethod
    def _interval_moment(lo: float, hi: float, k: int) -> float:
        # (hi^(k+1) - lo^(k+1)) / ((k+1)(hi - lo)) without the cancellation
        return math.fsum(lo ** j * hi ** (k - j) for j in range(k + 1)) / (k + 1)

    def moment_below(self, x: float, k: int) -> float:
        return self._interval_moment(self.a, min(x, self.b), k)

    def moment_above(self, x: float, k: int) -> float:
        return self._interval_moment(max(x, self.a), self.b, k)

    def decay_envelope(self) -> Tuple[float, float]:
        return math.exp(self.b) / self.width, 1.0

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.uniform(self.a, self.b, size)


@dataclass(frozen=True)
class ExponentialWeights(WeightDistribution):
    """Exp(rate) with density rate * exp(-rate * t) on [0, inf)."""
    rate: float

    kind = "exp"

    def __post_init__(self) -> None:
        if not math.isfinite(self.rate) or self.rate <= 0:
            raise DistributionSpecError(f"exponential rate must be a positive number, got {self.rate}")

    @property
    def support(self) -> Support:
        return Support(0.0, Unbounded.INFINITY)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate ** 2

    @property
    def spec(self) -> str:
        return f"exp:{_number(self.rate)}"

    def pdf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def cdf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)

    def sf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, np.exp(-self.rate * np.maximum(t, 0.0)), 1.0)

    def ppf(self, u: ArrayLike) -> np.ndarray:
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def isf(self, s: ArrayLike) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log(np.asarray(s, dtype=float)) / self.rate

    def moment_below(self, x: float, k: int) -> float:
        # E[X^k | X <= x] = k!/rate^k * P(k+1, rate x) / P(1, rate x)
        z = self.rate * x
        return (
            math.factorial(k) / self.rate ** k
            * float(special.gammainc(k + 1, z)) / float(special.gammainc(1, z))
        )

    def moment_above(self, x: float, k: int) -> float:
        # memoryless: X | X >= x is x + Exp(rate)
        x = max(x, 0.0)
        return math.fsum(
            math.comb(k, j) * x ** (k - j) * math.factorial(j) / self.rate ** j
            for j in range(k + 1)
        )

    def decay_envelope(self) -> Tuple[float, float]:
        return self.rate, self.rate

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size)


class ConditionMode(str, Enum):
    """How a conditioned law restricts its base distribution."""
    NONE = "none"
    BELOW = "below"
    ABOVE = "above"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class ConditionedLaw:
    """
    A base weight law, optionally conditioned.

    ``BELOW`` is X_{<=x}, ``ABOVE`` is X_{>=x} and ``MIXTURE`` is X_{p|x}: with
    probability p a draw of X_{<=x}, otherwise a draw of X_{>=x}.
    """
    base: WeightDistribution
    mode: ConditionMode = ConditionMode.NONE
    threshold: Optional[float] = None
    weight: Optional[float] = None

    def __post_init__(self) -> None:
        if self.mode is ConditionMode.NONE:
            return
        if self.threshold is None or not math.isfinite(self.threshold):
            raise DomainError(f"{self.mode.value} conditioning needs a finite threshold")
        x = self.threshold
        support = self.base.support
        needs_below = self.mode in (ConditionMode.BELOW, ConditionMode.MIXTURE)
        needs_above = self.mode in (ConditionMode.ABOVE, ConditionMode.MIXTURE)
        if needs_below and (x <= support.lower or float(self.base.cdf(x)) <= 0.0):
            raise DomainError(f"Below({x}) of {self.base.spec}: Pr[X <= x] = 0")
        if needs_above and (x >= support.upper_value or float(self.base.sf(x)) <= 0.0):
            raise DomainError(f"Above({x}) of {self.base.spec}: Pr[X >= x] = 0")
        if self.mode is ConditionMode.MIXTURE:
            if self.weight is None or not 0.0 <= self.weight <= 1.0:
                raise DomainError(f"Mixture weight must lie in [0, 1], got {self.weight}")

    @classmethod
    def unconditioned(cls, base: WeightDistribution) -> "ConditionedLaw":
        return cls(base)

    @classmethod
    def below(cls, base: WeightDistribution, x: float) -> "ConditionedLaw":
        return cls(base, ConditionMode.BELOW, float(x))

    @classmethod
    def above(cls, base: WeightDistribution, x: float) -> "ConditionedLaw":
        return cls(base, ConditionMode.ABOVE, float(x))

    @classmethod
    def mixture(cls, base: WeightDistribution, p: float, x: float) -> "ConditionedLaw":
        return cls(base, ConditionMode.MIXTURE, float(x), float(p))

    @classmethod
    def parse(cls, base: WeightDistribution, condition: Optional[str]) -> "ConditionedLaw":
        """
        Build a law from a CLI condition string.

        Accepts ``below:x``, ``above:x`` and ``mix:p,x``; ``None`` or an empty
        string leaves the base law unconditioned.
        """
        if not condition:
            return cls.unconditioned(base)
        head, _, body = condition.strip().partition(":")
        head = head.lower()
        try:
            if head == "below":
                return cls.below(base, float(body))
            if head == "above":
                return cls.above(base, float(body))
            if head == "mix":
                p, x = (float(part) for part in body.split(","))
                return cls.mixture(base, p, x)
        except ValueError as e:
            if isinstance(e, DomainError):
                raise
            raise DistributionSpecError(f"Malformed condition '{condition}': {e}") from e
        raise DistributionSpecError(f"Unknown condition '{condition}' (use below:x, above:x or mix:p,x)")

    @property
    def describe(self) -> str:
        """Human-readable identity, e.g. ``uniform:0,1|below:0.5``."""
        if self.mode is ConditionMode.NONE:
            return self.base.spec
        if self.mode is ConditionMode.MIXTURE:
            return f"{self.base.spec}|mix:{_number(self.weight)},{_number(self.threshold)}"
        return f"{self.base.spec}|{self.mode.value}:{_number(self.threshold)}"

    @property
    def lower_mass(self) -> float:
        return float(self.base.cdf(self.threshold))

    @property
    def upper_mass(self) -> float:
        return float(self.base.sf(self.threshold))

    @property
    def support(self) -> Support:
        base = self.base.support
        if self.mode is ConditionMode.BELOW:
            return Support(base.lower, self.threshold)
        if self.mode is ConditionMode.ABOVE:
            return Support(self.threshold, base.upper)
        return base

    def _below_pdf(self, t: np.ndarray) -> np.ndarray:
        return np.where(t <= self.threshold, self.base.pdf(t) / self.lower_mass, 0.0)

    def _above_pdf(self, t: np.ndarray) -> np.ndarray:
        return np.where(t >= self.threshold, self.base.pdf(t) / self.upper_mass, 0.0)

    def _below_cdf(self, t: np.ndarray) -> np.ndarray:
        return np.minimum(self.base.cdf(t) / self.lower_mass, 1.0)

    def _above_cdf(self, t: np.ndarray) -> np.ndarray:
        return np.where(t < self.threshold, 0.0, 1.0 - self.base.sf(t) / self.upper_mass)

    def _below_ppf(self, u: np.ndarray) -> np.ndarray:
        return self.base.ppf(u * self.lower_mass)

    def _above_ppf(self, u: np.ndarray) -> np.ndarray:
        return np.maximum(self.base.isf((1.0 - u) * self.upper_mass), self.threshold)

    def pdf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.mode is ConditionMode.NONE:
            return self.base.pdf(t)
        if self.mode is ConditionMode.BELOW:
            return self._below_pdf(t)
        if self.mode is ConditionMode.ABOVE:
            return self._above_pdf(t)
        p = self.weight
        return p * self._below_pdf(t) + (1.0 - p) * self._above_pdf(t)

    def cdf(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.mode is ConditionMode.NONE:
            return self.base.cdf(t)
        if self.mode is ConditionMode.BELOW:
            return self._below_cdf(t)
        if self.mode is ConditionMode.ABOVE:
            return self._above_cdf(t)
        p = self.weight
        return p * self._below_cdf(t) + (1.0 - p) * self._above_cdf(t)

    def ppf(self, u: ArrayLike) -> np.ndarray:
        """Inverse CDF on the truncated quantile range."""
        u = np.asarray(u, dtype=float)
        if self.mode is ConditionMode.NONE:
            return self.base.ppf(u)
        if self.mode is ConditionMode.BELOW:
            return self._below_ppf(u)
        if self.mode is ConditionMode.ABOVE:
            return self._above_ppf(u)
        p = self.weight
        with np.errstate(divide="ignore", invalid="ignore"):
            low = self._below_ppf(np.clip(u / p, 0.0, 1.0)) if p > 0 else np.full_like(u, np.nan)
            high = (
                self._above_ppf(np.clip((u - p) / (1.0 - p), 0.0, 1.0))
                if p < 1 else np.full_like(u, np.nan)
            )
        return np.where(u < p, low, high)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Inverse-CDF draws; constant cost however extreme the threshold."""
        return self.ppf(rng.random(size))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def second_moment(self) -> float:
        return self.moment(2)

    def moment(self, k: int) -> float:
        """E[Y^k] in closed form for every conditioning mode."""
        if self.mode is ConditionMode.NONE:
            return self.base.mean if k == 1 else (
                self.base.second_moment if k == 2 else self.base.moment_above(self.base.support.lower, k)
            )
        x = self.threshold
        if self.mode is ConditionMode.BELOW:
            return self.base.moment_below(x, k)
        if self.mode is ConditionMode.ABOVE:
            return self.base.moment_above(x, k)
        p = self.weight
        return p * self.base.moment_below(x, k) + (1.0 - p) * self.base.moment_above(x, k)


# Module-level operations

def parse_distribution(spec: str) -> WeightDistribution:
    """
    Parse ``uniform:a,b`` or ``exp:rate``.

    Raises:
        DistributionSpecError: If the spec is malformed or the parameters invalid
    """
    match = _SPEC_PATTERN.match(spec or "")
    if not match:
        raise DistributionSpecError(f"Malformed distribution spec '{spec}' (use uniform:a,b or exp:rate)")
    kind, body = match.group(1).lower(), match.group(2)
    try:
        params = [float(part) for part in body.split(",")]
    except ValueError as e:
        raise DistributionSpecError(f"Non-numeric parameter in '{spec}'") from e
    if kind == "uniform":
        if len(params) != 2:
            raise DistributionSpecError(f"uniform needs two parameters, got '{spec}'")
        return UniformWeights(*params)
    if len(params) != 1:
        raise DistributionSpecError(f"exp needs one parameter, got '{spec}'")
    return ExponentialWeights(params[0])


def pdf(d: WeightDistribution, t: float) -> float:
    """Density f(t); 0 outside the support."""
    return float(d.pdf(t))


def mean_below(d: WeightDistribution, x: float) -> float:
    """E[X | X <= x]."""
    return d.mean_below(x)


def mean_above(d: WeightDistribution, x: float) -> float:
    """E[X | X >= x]."""
    return d.mean_above(x)


def conditioned_mean(law: ConditionedLaw) -> float:
    return law.mean


def second_moment(law: ConditionedLaw) -> float:
    """E[Y^2] of a (possibly conditioned) law."""
    return law.second_moment


def decay_envelope(d: WeightDistribution) -> Tuple[float, float]:
    return d.decay_envelope()


def extreme_order_density(d: WeightDistribution, n: int, which: ExtremeKind) -> Density:
    """
    Density of the max or min of n independent draws.

    Max: n F(t)^(n-1) f(t); Min: n (1 - F(t))^(n-1) f(t).
    """
    if n < 1:
        raise DomainError(f"order statistic needs n >= 1, got {n}")
    which = ExtremeKind(which)

    if which is ExtremeKind.MAX:
        def density(t: ArrayLike) -> np.ndarray:
            return n * np.power(d.cdf(t), n - 1) * d.pdf(t)
    else:
        def density(t: ArrayLike) -> np.ndarray:
            return n * np.power(d.sf(t), n - 1) * d.pdf(t)

    return density


def order_statistic_density(d: WeightDistribution, n: int, k: int) -> Density:
    """Density of the k-th smallest of n independent draws (k = 1..n)."""
    if n < 1 or not 1 <= k <= n:
        raise DomainError(f"order statistic needs 1 <= k <= n, got k={k}, n={n}")
    shape = stats.beta(k, n - k + 1)

    def density(t: ArrayLike) -> np.ndarray:
        return shape.pdf(d.cdf(t)) * d.pdf(t)

    return density


def sample(law: ConditionedLaw, rng: np.random.Generator) -> float:
    """One inverse-CDF draw from a conditioned law."""
    return float(law.ppf(rng.random()))


def extreme_quantile(d: WeightDistribution, v: ArrayLike, n: int, which: ExtremeKind) -> np.ndarray:
    """
    Quantile of the max or min of n draws at level ``v`` in (0, 1).

    Max: F(x)^n = v; Min: (1 - F(x))^n = v, so ``v -> 0`` gives the upper end
    for the min. The smaller of F and 1 - F is formed with ``expm1`` and fed
    to ``ppf`` or ``isf`` to keep full precision for large n.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        log_level = np.log(np.asarray(v, dtype=float)) / n
        near = np.exp(log_level)
        far = -np.expm1(log_level)
        if ExtremeKind(which) is ExtremeKind.MAX:
            # F(x) = near, 1 - F(x) = far
            return np.where(near < 0.5, d.ppf(np.minimum(near, 0.5)), d.isf(np.minimum(far, 0.5)))
        # 1 - F(x) = near, F(x) = far
        return np.where(far < 0.5, d.ppf(np.minimum(far, 0.5)), d.isf(np.minimum(near, 0.5)))
