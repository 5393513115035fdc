"""
Renewal function m(Q) = sum_{i>=0} Pr[S_i < Q] of a (conditioned) weight law.

S_0 = 0 and S_i = y_1 + ... + y_i with y_j i.i.d. from the law, so m(Q) counts
the partial sums (including the empty one) strictly below Q. Two evaluators
are provided: block-parallel Monte Carlo and a deterministic FFT convolution
on a fine lattice, which resolves residuals far below Monte Carlo noise.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import signal

from ..models.exceptions import ConvergenceError, DomainError, RunawayRenewalError
from ..models.schemas import DecayReport, RenewalEstimate, RenewalMethod, RenewalPoint, RenewalSummary
from .distributions import ConditionedLaw
from .streams import Stream, partition_blocks, run_blocks

logger = logging.getLogger(__name__)

MAX_DRAWS = 10_000_000
CHUNK_CELLS = 1 << 22
RESOLVABLE_SIGMA = 5.0
RESOLVABLE_FLOOR = 1e-9


def renewal_counts(
    rng: np.random.Generator,
    law: ConditionedLaw,
    size: int,
    thresholds: np.ndarray,
    max_draws: int = MAX_DRAWS,
) -> np.ndarray:
    """
    Per replication, #{k >= 0 : S_k < t} for every threshold t.

    All thresholds share the same draws. Returns an int array (size, len(thresholds)).

    Raises:
        RunawayRenewalError: If a replication needs more than ``max_draws`` draws
    """
    thresholds = np.asarray(thresholds, dtype=float)
    counts = np.zeros((size, len(thresholds)), dtype=np.int64)
    counts[:, thresholds > 0] = 1
    top = float(thresholds.max()) if len(thresholds) else 0.0
    if top <= 0 or size == 0:
        return counts

    sums = np.zeros(size)
    draws = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    expected_steps = int(math.ceil(top / law.mean * 1.1)) + 8
    while active.size:
        steps = max(8, min(expected_steps, CHUNK_CELLS // active.size))
        prefix = sums[active, None] + np.cumsum(law.sample(rng, (active.size, steps)), axis=1)
        for j, t in enumerate(thresholds):
            counts[active, j] += np.count_nonzero(prefix < t, axis=1)
        sums[active] = prefix[:, -1]
        draws[active] += steps
        if np.any(draws[active] > max_draws):
            raise RunawayRenewalError(
                f"renewal replication exceeded {max_draws} draws for {law.describe} at Q={top}"
            )
        active = active[sums[active] < top]
        expected_steps = 8
    return counts


def _moment_block(
    rng: np.random.Generator,
    size: int,
    law: ConditionedLaw,
    thresholds: np.ndarray,
    contrasts: np.ndarray,
    max_draws: int,
):
    values = renewal_counts(rng, law, size, thresholds, max_draws) @ contrasts
    return values.sum(axis=0).astype(float), np.square(values).sum(axis=0).astype(float)


def _contrast_estimates(
    law: ConditionedLaw,
    thresholds: np.ndarray,
    contrasts: np.ndarray,
    reps: int,
    seed: int,
    threads: Optional[int],
    block_size: int,
    max_draws: int,
) -> List[RenewalEstimate]:
    """Mean and stderr of linear combinations of the threshold counts."""
    if reps < 1:
        raise DomainError(f"renewal estimation needs reps >= 1, got {reps}")
    blocks = partition_blocks(reps, block_size)
    parts = run_blocks(_moment_block, blocks, seed, Stream.RENEWAL, threads,
                       law=law, thresholds=thresholds, contrasts=contrasts, max_draws=max_draws)
    sums = np.zeros(contrasts.shape[1])
    squares = np.zeros(contrasts.shape[1])
    for part_sum, part_square in parts:
        sums = sums + part_sum
        squares = squares + part_square

    means = sums / reps
    if reps > 1:
        stderr = np.sqrt(np.maximum(squares - sums * sums / reps, 0.0) / (reps - 1) / reps)
    else:
        stderr = np.zeros_like(means)
    return [RenewalEstimate(value=float(m), stderr=float(s), reps=reps) for m, s in zip(means, stderr)]


def renewal_estimates(
    law: ConditionedLaw,
    q_grid: Sequence[float],
    reps: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: int = 1 << 14,
    max_draws: int = MAX_DRAWS,
) -> List[RenewalEstimate]:
    """Monte Carlo m(Q) for a whole grid from one set of replications."""
    grid = np.asarray(q_grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise DomainError("renewal quotas must be finite")
    return _contrast_estimates(law, grid, np.eye(len(grid)), reps, seed, threads, block_size, max_draws)


def renewal_mc(
    law: ConditionedLaw,
    q: float,
    reps: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: int = 1 << 14,
    max_draws: int = MAX_DRAWS,
) -> RenewalEstimate:
    """
    Monte Carlo m(Q): replications draw until the running sum reaches Q.

    Raises:
        RunawayRenewalError: If a replication exceeds the draw guard
    """
    return renewal_estimates(law, [q], reps, seed, threads, block_size, max_draws)[0]


def interval_count(
    law: ConditionedLaw,
    q: float,
    x: float,
    reps: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: int = 1 << 14,
    max_draws: int = MAX_DRAWS,
) -> RenewalEstimate:
    """
    Expected number of partial sums in [Q - x, Q), i.e. m(Q) - m(Q - x).

    Both counts come from the same replications.
    """
    if not 0 <= x <= q or not math.isfinite(q):
        raise DomainError(f"interval count needs 0 <= x <= Q, got x={x}, Q={q}")
    thresholds = np.array([q - x, q])
    contrast = np.array([[-1.0], [1.0]])
    return _contrast_estimates(law, thresholds, contrast, reps, seed, threads, block_size, max_draws)[0]


def renewal_asymptote(law: ConditionedLaw, q: float) -> float:
    """Q/E[Y] + E[Y^2] / (2 E[Y]^2)."""
    mean = law.mean
    if not mean > 0:
        raise DomainError(f"renewal asymptote needs E[Y] > 0, got {mean}")
    return q / mean + law.second_moment / (2.0 * mean * mean)


def renewal_convolve(
    law: ConditionedLaw,
    q_grid: Sequence[float],
    step: float = 1e-4,
    mass_floor: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """
    Deterministic m(Q) by repeated lattice convolution.

    Y is discretized on cells [j h, (j+1) h) with masses from CDF differences
    and represented by the cell midpoint, so S_i sits at (k + i/2) h for
    lattice index k. Each lattice mass is spread uniformly over a cell of
    width h when reading Pr[S_i < Q]. Mass beyond max Q never returns below
    it and is dropped.

    Raises:
        ConvergenceError: If the mass below max Q stays above ``mass_floor``
            after ``max_iter`` convolutions
    """
    grid = np.asarray(q_grid, dtype=float)
    result = np.where(grid > 0, 1.0, 0.0)
    top = float(grid.max()) if grid.size else 0.0
    if top <= 0:
        return result

    cells = int(math.ceil(top / step)) + 1
    edges = np.arange(cells + 1) * step
    cell_mass = np.maximum(np.diff(law.cdf(edges)), 0.0)
    lattice = np.arange(cells + 1)

    current = cell_mass.copy()
    for i in range(1, max_iter + 1):
        cumulative = np.concatenate([[0.0], np.cumsum(current)])
        position = grid / step - i / 2.0 + 0.5
        below = np.interp(position, lattice, cumulative, left=0.0, right=cumulative[-1])
        result += np.where(grid > 0, below, 0.0)
        if below.max() < mass_floor:
            logger.debug(f"convolution stopped after {i} steps for {law.describe}")
            return result
        current = np.maximum(signal.fftconvolve(current, cell_mass)[:cells], 0.0)

    raise ConvergenceError(f"renewal convolution did not drain below {mass_floor} in {max_iter} steps")


def uniform_renewal_function(q: float) -> float:
    """Closed-form m(Q) for U(0, 1): sum_{k=0}^{floor Q} (-1)^k (Q-k)^k e^(Q-k) / k!."""
    if q <= 0:
        return 0.0
    return math.fsum(
        (-1) ** k * (q - k) ** k * math.exp(q - k) / math.factorial(k)
        for k in range(int(math.floor(q)) + 1)
    )


def renewal_summary(
    law: ConditionedLaw,
    q_grid: Sequence[float],
    method: RenewalMethod = RenewalMethod.MC,
    reps: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    block_size: int = 1 << 14,
    max_draws: int = MAX_DRAWS,
    step: float = 1e-4,
    mass_floor: float = 1e-12,
) -> RenewalSummary:
    """m(Q) estimates, asymptote and residual for every Q of the grid."""
    grid = [float(q) for q in q_grid]
    if RenewalMethod(method) is RenewalMethod.MC:
        if reps is None or seed is None:
            raise DomainError("Monte Carlo renewal needs reps and seed")
        estimates = renewal_estimates(law, grid, reps, seed, threads, block_size, max_draws)
        m_values = [e.value for e in estimates]
        errors: List[Optional[float]] = [e.stderr for e in estimates]
    else:
        m_values = renewal_convolve(law, grid, step, mass_floor).tolist()
        errors = [None] * len(grid)
        reps = seed = None

    points = []
    for q, m_hat, stderr in zip(grid, m_values, errors):
        asymptote = renewal_asymptote(law, q)
        points.append(RenewalPoint(q=q, m_hat=m_hat, stderr=stderr, asymptote=asymptote, residual=m_hat - asymptote))

    return RenewalSummary(
        law=law.describe,
        method=method,
        mean=law.mean,
        second_moment=law.second_moment,
        reps=reps,
        seed=seed,
        points=points,
    )


def fit_residual_decay(summary: RenewalSummary) -> DecayReport:
    """
    Least-squares slope of log|residual| against Q over resolvable points.

    A residual is resolvable when it exceeds max(5 stderr, 1e-9). Decay is
    consistent when the slope is negative or fewer than two points resolve.
    """
    resolvable = [
        p for p in summary.points
        if abs(p.residual) > max(RESOLVABLE_SIGMA * (p.stderr or 0.0), RESOLVABLE_FLOOR)
    ]
    slope = None
    if len(resolvable) >= 2:
        qs = np.array([p.q for p in resolvable])
        logs = np.log(np.abs([p.residual for p in resolvable]))
        slope = float(np.polyfit(qs, logs, 1)[0])

    return DecayReport(
        summary=summary,
        resolvable=[p.q for p in resolvable],
        slope=slope,
        decay_consistent=slope is None or slope < 0,
        noise_dominated=not resolvable,
    )


def residual_decay_report(
    law: ConditionedLaw,
    q_grid: Sequence[float],
    reps: Optional[int] = None,
    seed: Optional[int] = None,
    method: RenewalMethod = RenewalMethod.MC,
    **kwargs,
) -> DecayReport:
    """Residual table over an increasing grid of at least four quotas, with its decay fit."""
    grid = list(q_grid)
    if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("residual decay needs an increasing grid of at least 4 quotas")
    return fit_residual_decay(renewal_summary(law, grid, method, reps, seed, **kwargs))
