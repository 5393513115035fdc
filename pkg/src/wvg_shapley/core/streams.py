"""
Deterministic random substreams and block-parallel execution.

Replications are cut into fixed-size blocks. Block ``b`` of engine ``stream``
draws from ``SeedSequence(seed, spawn_key=(stream, b))``, so its numbers
depend only on the root seed and its own position, never on how many
workers ran or in which order they finished. Results come back in block
order and are merged by the caller.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Callable, List, Optional, TypeVar

import numpy as np
from joblib import Parallel, cpu_count, delayed

from ..models.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Stream(IntEnum):
    """Independent substream families, one per engine."""
    EXPERIMENT = 0
    SAMPLED_SHAPLEY = 1
    RENEWAL = 2
    CONDITIONAL = 3


@dataclass(frozen=True)
class Block:
    """A contiguous slice of replications."""
    index: int
    start: int
    size: int


def partition_blocks(total: int, block_size: int) -> List[Block]:
    """Split ``total`` replications into blocks of at most ``block_size``."""
    if total < 0 or block_size < 1:
        raise ValueError(f"invalid partition: total={total}, block_size={block_size}")
    return [
        Block(index, start, min(block_size, total - start))
        for index, start in enumerate(range(0, total, block_size))
    ]


def block_generator(seed: int, stream: Stream, block_index: int) -> np.random.Generator:
    """
    Generator owned by one block of one engine.

    Raises:
        ConfigurationError: If the seed is outside [0, 2^64)
    """
    if not 0 <= int(seed) < 2**64:
        raise ConfigurationError(f"seed must lie in [0, 2^64), got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block_index)))
    return np.random.default_rng(sequence)


def resolve_threads(threads: Optional[int]) -> int:
    """Worker count; ``None`` means every available core."""
    return max(1, int(threads)) if threads else max(1, cpu_count())


def run_blocks(
    kernel: Callable[..., T],
    blocks: List[Block],
    seed: int,
    stream: Stream,
    threads: Optional[int] = None,
    **kwargs: Any,
) -> List[T]:
    """
    Run ``kernel(rng, block.size, **kwargs)`` for every block.

    Returns the per-block results in block order regardless of the worker
    count. Kernels are numpy-bound and release the GIL, so a thread pool is
    enough.
    """
    workers = min(resolve_threads(threads), max(1, len(blocks)))
    logger.debug(f"stream {stream.name}: {len(blocks)} blocks on {workers} worker(s)")

    if workers == 1:
        return [kernel(block_generator(seed, stream, b.index), b.size, **kwargs) for b in blocks]

    return Parallel(n_jobs=workers, prefer="threads")(
        delayed(kernel)(block_generator(seed, stream, b.index), b.size, **kwargs) for b in blocks
    )
