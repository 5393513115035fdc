"""
Exact and sampled Shapley-Shubik values of a weighted voting game.

Agents are identified by rank (rank 1 = lowest weight). An agent is pivotal
for its predecessors when their weight ``prefix`` satisfies
``prefix < q <= prefix + w``.
"""

import itertools
import logging
import math
from typing import Optional, Tuple

import numpy as np

from ..models.exceptions import DomainError, GameSizeError
from ..models.schemas import Game, ShapleyMethod, ShapleyProfile
from .streams import Stream, partition_blocks, run_blocks

logger = logging.getLogger(__name__)

PERM_MAX_N = 11
SUBSET_MAX_N = 24
PERM_CHUNK = 1 << 16


def is_pivotal(game: Game, prefix_weight: float, agent_weight: float) -> bool:
    """True iff ``prefix_weight < q <= prefix_weight + agent_weight``."""
    return prefix_weight < game.quota and prefix_weight + agent_weight >= game.quota


def _neumaier_add(s: np.ndarray, c: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """One vectorized step of Neumaier compensated summation."""
    t = s + x
    c = c + np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
    return t, c


def _count_perm_pivots(weights: np.ndarray, quota: float, perms: np.ndarray) -> np.ndarray:
    """Pivot counts per agent over a batch of orders, compensated prefix sums."""
    rows, n = perms.shape
    s = np.zeros(rows)
    c = np.zeros(rows)
    counts = np.zeros(n, dtype=np.int64)
    for pos in range(n):
        agents = perms[:, pos]
        before = s + c
        s, c = _neumaier_add(s, c, weights[agents])
        pivotal = (before < quota) & (s + c >= quota)
        counts += np.bincount(agents[pivotal], minlength=n)
    return counts


def shapley_exact_perm(game: Game, max_n: int = PERM_MAX_N) -> ShapleyProfile:
    """
    Average pivot indicators over all n! orders.

    Raises:
        GameSizeError: If n exceeds ``max_n``
    """
    n = game.n
    if n > max_n:
        raise GameSizeError(f"permutation enumeration needs n <= {max_n}, got n={n}")

    weights = np.asarray(game.weights)
    counts = np.zeros(n, dtype=np.int64)
    orders = itertools.permutations(range(n))
    while True:
        chunk = list(itertools.islice(orders, PERM_CHUNK))
        if not chunk:
            break
        counts += _count_perm_pivots(weights, game.quota, np.asarray(chunk, dtype=np.intp))

    total = math.factorial(n)
    return ShapleyProfile(
        method=ShapleyMethod.EXACT_PERM,
        quota=game.quota,
        values=(counts / total).tolist(),
        proper=game.is_proper,
    )


def subset_sum_table(weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compensated coalition weights and sizes for all 2^n subsets.

    Index bit i set means agent i (rank i+1) is in the coalition.
    """
    s = np.zeros(1)
    c = np.zeros(1)
    size = np.zeros(1, dtype=np.int8)
    for w in weights:
        t, ct = _neumaier_add(s, c, np.full_like(s, w))
        s = np.concatenate([s, t])
        c = np.concatenate([c, ct])
        size = np.concatenate([size, size + 1])
    return s + c, size


def coalition_coefficients(n: int) -> np.ndarray:
    """|S|!(n-|S|-1)!/n! = 1/(n * C(n-1, |S|)) for |S| = 0..n-1."""
    return np.array([1.0 / (n * math.comb(n - 1, k)) for k in range(n)])


def exact_subset_values(weights: np.ndarray, quota: float) -> np.ndarray:
    """Shapley values by the coalition-sum form; no size guard."""
    n = len(weights)
    totals, sizes = subset_sum_table(weights)
    coef = coalition_coefficients(n)
    values = np.zeros(n)
    for i in range(n):
        # axis 1 of the reshaped table toggles bit i
        shape = (-1, 2, 1 << i)
        without = totals.reshape(shape)[:, 0, :]
        with_i = totals.reshape(shape)[:, 1, :]
        pivotal = (without < quota) & (with_i >= quota)
        per_size = np.bincount(sizes.reshape(shape)[:, 0, :][pivotal], minlength=n)
        values[i] = math.fsum(float(count) * a for count, a in zip(per_size, coef))
    return values


def shapley_exact_subset(game: Game, max_n: int = SUBSET_MAX_N) -> ShapleyProfile:
    """
    Sum pivotal coalitions weighted by |S|!(n-|S|-1)!/n!.

    Raises:
        GameSizeError: If n exceeds ``max_n``
    """
    if game.n > max_n:
        raise GameSizeError(f"subset enumeration needs n <= {max_n}, got n={game.n}")

    values = exact_subset_values(np.asarray(game.weights), game.quota)
    return ShapleyProfile(
        method=ShapleyMethod.EXACT_SUBSET,
        quota=game.quota,
        values=values.tolist(),
        proper=game.is_proper,
    )


def _sample_block(rng: np.random.Generator, size: int, weights: np.ndarray, quota: float) -> np.ndarray:
    n = len(weights)
    perms = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
    after = np.cumsum(weights[perms], axis=1)
    before = after - weights[perms]
    pivotal = (before < quota) & (after >= quota)
    return np.bincount(perms[pivotal], minlength=n)


def shapley_sample_perms(
    game: Game,
    k: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: int = 1 << 14,
) -> ShapleyProfile:
    """
    Estimate values from ``k`` uniform random orders.

    The per-agent standard error is the sample standard deviation of the 0/1
    pivot indicator divided by sqrt(k).
    """
    if k < 1:
        raise DomainError(f"sampled Shapley needs k >= 1, got {k}")

    weights = np.asarray(game.weights)
    blocks = partition_blocks(k, block_size)
    partial = run_blocks(_sample_block, blocks, seed, Stream.SAMPLED_SHAPLEY, threads,
                         weights=weights, quota=game.quota)
    counts = np.sum(partial, axis=0)

    p_hat = counts / k
    if k > 1:
        stderr = np.sqrt(p_hat * (1.0 - p_hat) / (k - 1))
    else:
        stderr = np.zeros_like(p_hat)

    logger.debug(f"sampled {k} orders for n={game.n}, q={game.quota}")
    return ShapleyProfile(
        method=ShapleyMethod.SAMPLED_PERM,
        quota=game.quota,
        values=p_hat.tolist(),
        stderr=stderr.tolist(),
        samples=k,
        proper=game.is_proper,
    )
