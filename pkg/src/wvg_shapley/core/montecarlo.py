"""
Monte Carlo engine for expected sorted-rank Shapley values.

Each replication samples a game from the natural or normalized i.i.d. model
and contributes to per (quota, rank) accumulators:

- ``one_perm``: one uniform order per game; the pivot's rank gets a count.
- ``exact``: the full exact profile of every sampled game (small n only).
- ``conditional``: natural model only; draws the extreme weight x first and
  counts prefix sums of the other n-1 conditioned weights in [Q - x, Q).
"""

import logging
from bisect import bisect_left
from itertools import accumulate
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.exceptions import DomainError
from ..models.schemas import Estimator, ExperimentConfig, ExperimentResult, ExtremeKind, WeightModel
from .distributions import WeightDistribution, extreme_quantile, parse_distribution
from .shapley import coalition_coefficients
from .streams import Stream, partition_blocks, run_blocks

logger = logging.getLogger(__name__)

EXACT_CHUNK = 1024


def pivotal_rank(sorted_weights: Sequence[float], quota: float, permutation: Sequence[int]) -> Optional[int]:
    """
    Rank of the pivotal agent when agents arrive in ``permutation`` order.

    Ranks are 1-based. Returns ``None`` when no agent is pivotal (the game is
    improper at this quota).

    Raises:
        DomainError: If ``permutation`` is not a bijection on 1..n
    """
    n = len(sorted_weights)
    if sorted(permutation) != list(range(1, n + 1)):
        raise DomainError(f"permutation must be a bijection on ranks 1..{n}")

    if quota <= 0:
        return None
    prefix = list(accumulate(sorted_weights[rank - 1] for rank in permutation))
    pos = bisect_left(prefix, quota)
    return permutation[pos] if pos < n else None


def first_reaching(prefix: np.ndarray, quota: float) -> np.ndarray:
    """
    Per row of non-decreasing ``prefix``, the first column whose value is >= ``quota``.

    Rows that never reach the quota get ``n``. All rows are bisected together,
    so the cost is ceil(log2(n + 1)) vectorised steps.
    """
    rows, n = prefix.shape
    lo = np.zeros(rows, dtype=np.intp)
    hi = np.full(rows, n, dtype=np.intp)
    index = np.arange(rows)
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) // 2
        below = prefix[index, np.minimum(mid, n - 1)] < quota
        lo = np.where(active & below, mid + 1, lo)
        hi = np.where(active & ~below, mid, hi)


def sample_games(
    rng: np.random.Generator,
    dist: WeightDistribution,
    size: int,
    n: int,
    model: WeightModel,
) -> np.ndarray:
    """``size`` games as rows of sorted weights (divided by their sum when normalized)."""
    weights = dist.sample(rng, (size, n))
    if model is WeightModel.NORMALIZED:
        weights = weights / weights.sum(axis=1, keepdims=True)
    weights.sort(axis=1)
    return weights


def one_perm_block(
    rng: np.random.Generator,
    size: int,
    dist: WeightDistribution,
    n: int,
    model: WeightModel,
    grid: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pivot counts per (quota, rank) and improper counts per quota.

    The pivot position is the first index whose prefix sum (after each
    arrival) reaches q, found by bisection on the monotone rows.
    """
    weights = sample_games(rng, dist, size, n, model)
    perms = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
    prefix = np.cumsum(np.take_along_axis(weights, perms, axis=1), axis=1)

    counts = np.zeros((len(grid), n), dtype=np.int64)
    improper = np.zeros(len(grid), dtype=np.int64)
    for g, quota in enumerate(grid):
        pos = first_reaching(prefix, quota)
        proper = pos < n
        ranks = perms[proper, pos[proper]]
        counts[g] = np.bincount(ranks, minlength=n)
        improper[g] = size - np.count_nonzero(proper)
    return counts, improper


def _batched_subset_totals(weights: np.ndarray) -> np.ndarray:
    """Coalition weights of every subset for a batch of games, shape (games, 2^n)."""
    totals = np.zeros((weights.shape[0], 1))
    for i in range(weights.shape[1]):
        totals = np.concatenate([totals, totals + weights[:, i:i + 1]], axis=1)
    return totals


def exact_block(
    rng: np.random.Generator,
    size: int,
    dist: WeightDistribution,
    n: int,
    model: WeightModel,
    grid: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sums and squared sums of exact per-game values, plus improper counts."""
    weights = sample_games(rng, dist, size, n, model)
    coef = coalition_coefficients(n)
    sizes = np.zeros(1, dtype=np.intp)
    for _ in range(n):
        sizes = np.concatenate([sizes, sizes + 1])

    sums = np.zeros((len(grid), n))
    squares = np.zeros((len(grid), n))
    improper = np.zeros(len(grid), dtype=np.int64)
    for start in range(0, size, EXACT_CHUNK):
        chunk = weights[start:start + EXACT_CHUNK]
        totals = _batched_subset_totals(chunk)
        games = chunk.shape[0]
        for i in range(n):
            shape = (games, -1, 2, 1 << i)
            without = totals.reshape(shape)[:, :, 0, :].reshape(games, -1)
            with_i = totals.reshape(shape)[:, :, 1, :].reshape(games, -1)
            coalition_coef = coef[sizes.reshape(-1, 2, 1 << i)[:, 0, :].ravel()]
            for g, quota in enumerate(grid):
                pivotal = (without < quota) & (with_i >= quota)
                values = pivotal @ coalition_coef
                sums[g, i] += values.sum()
                squares[g, i] += np.square(values).sum()
        for g, quota in enumerate(grid):
            improper[g] += np.count_nonzero(totals[:, -1] < quota)
    return sums, squares, improper


def conditional_block(
    rng: np.random.Generator,
    size: int,
    dist: WeightDistribution,
    n: int,
    grid: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sums and squared sums of the conditional estimator, columns (min, max).

    Given the extreme weight x, the other n-1 weights are i.i.d. from the law
    conditioned below x (max) or above x (min), and the extreme agent is
    pivotal at position i iff S_{i-1} lies in [Q - x, Q).
    """
    sums = np.zeros((len(grid), 2))
    squares = np.zeros((len(grid), 2))
    for col, which in enumerate((ExtremeKind.MIN, ExtremeKind.MAX)):
        level = rng.random(size)
        if which is ExtremeKind.MIN:
            level = 1.0 - level
        x = extreme_quantile(dist, level, n, which)
        u = rng.random((size, n - 1))
        if which is ExtremeKind.MAX:
            others = dist.ppf(u * dist.cdf(x)[:, None])
        else:
            others = np.maximum(dist.isf((1.0 - u) * dist.sf(x)[:, None]), x[:, None])
        prefix = np.concatenate([np.zeros((size, 1)), np.cumsum(others, axis=1)], axis=1)
        for g, quota in enumerate(grid):
            hits = np.count_nonzero((prefix >= quota - x[:, None]) & (prefix < quota), axis=1)
            values = hits / n
            sums[g, col] = values.sum()
            squares[g, col] = np.square(values).sum()
    return sums, squares


def _sample_stderr(sums: np.ndarray, squares: np.ndarray, reps: int) -> np.ndarray:
    if reps < 2:
        return np.zeros_like(sums)
    variance = np.maximum(squares - sums * sums / reps, 0.0) / (reps - 1)
    return np.sqrt(variance / reps)


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """
    Estimate E[phi_rank] for every quota of the grid.

    Deterministic given ``cfg.seed``; the worker count only changes wall time.
    """
    dist = parse_distribution(cfg.dist)
    grid = np.asarray(cfg.quota_grid, dtype=float)
    n, reps = cfg.n, cfg.reps
    blocks = partition_blocks(reps, cfg.block_size)
    ranks = cfg.ranks
    columns = [r - 1 for r in ranks]

    if cfg.estimator is Estimator.ONE_PERM:
        parts = run_blocks(one_perm_block, blocks, cfg.seed, Stream.EXPERIMENT, threads,
                           dist=dist, n=n, model=cfg.model, grid=grid)
        counts = np.sum([p[0] for p in parts], axis=0)
        improper = np.sum([p[1] for p in parts], axis=0)
        p_hat = counts[:, columns] / reps
        means = p_hat
        stderr = np.sqrt(p_hat * (1.0 - p_hat) / reps)

    elif cfg.estimator is Estimator.EXACT:
        parts = run_blocks(exact_block, blocks, cfg.seed, Stream.EXPERIMENT, threads,
                           dist=dist, n=n, model=cfg.model, grid=grid)
        sums = _merge(parts, 0)[:, columns]
        squares = _merge(parts, 1)[:, columns]
        improper = np.sum([p[2] for p in parts], axis=0)
        means = sums / reps
        stderr = _sample_stderr(sums, squares, reps)

    else:
        parts = run_blocks(conditional_block, blocks, cfg.seed, Stream.CONDITIONAL, threads,
                           dist=dist, n=n, grid=grid)
        sums = _merge(parts, 0)
        squares = _merge(parts, 1)
        if n == 1:
            sums, squares = sums[:, :1], squares[:, :1]
        improper = np.zeros(len(grid), dtype=np.int64)
        means = sums / reps
        stderr = _sample_stderr(sums, squares, reps)

    logger.debug(f"{cfg.estimator.value}: {len(blocks)} blocks, improper per quota {improper.tolist()}")
    return ExperimentResult(
        config=cfg,
        ranks=ranks,
        means=means.tolist(),
        stderr=stderr.tolist(),
        improper=[int(v) for v in improper],
    )


def _merge(parts: List[tuple], index: int) -> np.ndarray:
    """Sum one accumulator over blocks in block order."""
    total = np.zeros_like(parts[0][index])
    for part in parts:
        total = total + part[index]
    return total
