"""
Tests for the Monte Carlo experiment engine and its random substreams.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from wvg_shapley.core.montecarlo import first_reaching, pivotal_rank, run_experiment, sample_games
from wvg_shapley.core.streams import Stream, block_generator, partition_blocks, run_blocks
from wvg_shapley.models.exceptions import ConfigurationError, DomainError
from wvg_shapley.models.schemas import ExperimentConfig, WeightModel


def _config(**overrides) -> ExperimentConfig:
    params = dict(
        dist="uniform:0,1",
        n=5,
        model="normalized",
        quota_grid="0.2:0.8:0.2",
        reps=6000,
        seed=123,
        block_size=512,
    )
    params.update(overrides)
    return ExperimentConfig(**params)


def _within(a: float, sa: float, b: float, sb: float, sigmas: float = 5.0) -> bool:
    return abs(a - b) <= sigmas * math.hypot(sa, sb) + 1e-12


@pytest.mark.unit
class TestStreams:
    """Test suite for block partitioning and substreams."""

    def test_partition_blocks(self):
        """Test blocks cover the total in order with a short tail."""
        blocks = partition_blocks(10, 4)
        assert [(b.index, b.start, b.size) for b in blocks] == [(0, 0, 4), (1, 4, 4), (2, 8, 2)]
        assert partition_blocks(0, 4) == []

    def test_partition_rejects_bad_block_size(self):
        """Test a non-positive block size is rejected."""
        with pytest.raises(ValueError):
            partition_blocks(10, 0)

    def test_substreams_are_keyed(self):
        """Test a block's generator depends on seed, stream and block index only."""
        first = block_generator(5, Stream.EXPERIMENT, 3).random(4)
        again = block_generator(5, Stream.EXPERIMENT, 3).random(4)
        other_stream = block_generator(5, Stream.RENEWAL, 3).random(4)
        other_block = block_generator(5, Stream.EXPERIMENT, 4).random(4)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other_stream)
        assert not np.array_equal(first, other_block)

    def test_seed_outside_range(self):
        """Test seeds outside [0, 2^64) raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            block_generator(-1, Stream.EXPERIMENT, 0)

    def test_run_blocks_order_independent_of_workers(self):
        """Test results come back in block order for any worker count."""
        blocks = partition_blocks(100, 7)

        def kernel(rng, size, offset):
            return rng.random(size).sum() + offset

        sequential = run_blocks(kernel, blocks, 17, Stream.EXPERIMENT, threads=1, offset=1.0)
        parallel = run_blocks(kernel, blocks, 17, Stream.EXPERIMENT, threads=4, offset=1.0)
        assert sequential == parallel
        assert len(sequential) == len(blocks)


@pytest.mark.unit
class TestPivotalRank:
    """Test suite for the single-order pivot."""

    def test_pivot_by_order(self):
        """Test the pivot of weights 1, 2, 3 at quota 4 for two orders."""
        assert pivotal_rank([1, 2, 3], 4, [1, 2, 3]) == 3
        assert pivotal_rank([1, 2, 3], 4, [3, 1, 2]) == 1
        assert pivotal_rank([1, 2, 3], 4, [2, 3, 1]) == 3

    def test_improper_quota(self):
        """Test no pivot when the quota exceeds the total weight."""
        assert pivotal_rank([1, 2, 3], 7, [1, 2, 3]) is None

    def test_rejects_non_bijection(self):
        """Test a permutation that repeats a rank is rejected."""
        with pytest.raises(DomainError):
            pivotal_rank([1, 2, 3], 4, [1, 1, 2])

    def test_zero_quota_is_improper(self):
        """Test q = 0 has no pivot."""
        assert pivotal_rank([1, 2, 3], 0.0, [1, 2, 3]) is None

    @pytest.mark.parametrize("n", [1, 2, 7, 64])
    def test_first_reaching_matches_linear_scan(self, n):
        """Test bisection on prefix rows against counting prefixes below the quota."""
        rng = np.random.default_rng(n)
        prefix = np.cumsum(rng.exponential(size=(500, n)), axis=1)
        for quota in (1e-3, 0.5, n / 2, float(n), 3.0 * n):
            assert np.array_equal(first_reaching(prefix, quota), np.count_nonzero(prefix < quota, axis=1))

    def test_first_reaching_ties(self):
        """Test a prefix equal to the quota is the first reaching column."""
        prefix = np.array([[1.0, 2.0, 3.0], [2.0, 2.0, 2.0], [0.5, 1.0, 1.5]])
        assert first_reaching(prefix, 2.0).tolist() == [1, 0, 3]


@pytest.mark.unit
class TestExperimentConfig:
    """Test suite for experiment configuration validation."""

    def test_grid_string_and_defaults(self):
        """Test a range grid is expanded and the spec canonicalized."""
        cfg = _config(dist="uniform:0.0,1.0", quota_grid="0.05:0.95:0.05")
        assert cfg.dist == "uniform:0,1"
        assert len(cfg.quota_grid) == 19
        assert cfg.quota_grid[0] == 0.05 and cfg.quota_grid[-1] == 0.95
        assert cfg.ranks == [1, 5]

    @pytest.mark.parametrize(
        "overrides",
        [
            {"reps": 0},
            {"n": 0},
            {"seed": -1},
            {"quota_grid": "0.5:1.0:0.5"},
            {"quota_grid": "0.5,0.3"},
            {"model": "natural", "quota_grid": "0,1"},
            {"estimator": "exact", "n": 12},
            {"estimator": "conditional"},
            {"estimator": "conditional", "model": "natural", "quota_grid": "1", "full_profile": True},
            {"dist": "normal:0,1"},
        ],
    )
    def test_invalid_configs(self, overrides):
        """Test invalid combinations fail validation."""
        with pytest.raises(ValidationError):
            _config(**overrides)

    def test_ranks_for_single_agent(self):
        """Test n = 1 reports rank 1 only."""
        assert _config(n=1).ranks == [1]
        assert _config(n=3, full_profile=True).ranks == [1, 2, 3]


@pytest.mark.integration
class TestRunExperiment:
    """Test suite for experiment runs."""

    def test_sample_games_normalized_rows(self, exp1):
        """Test normalized games are sorted and sum to one."""
        games = sample_games(np.random.default_rng(0), exp1, 100, 6, WeightModel.NORMALIZED)
        assert np.allclose(games.sum(axis=1), 1.0)
        assert np.all(np.diff(games, axis=1) >= 0)

    def test_deterministic_across_threads(self):
        """Test identical seeds give identical estimates for any worker count."""
        cfg = _config()
        one = run_experiment(cfg, threads=1)
        four = run_experiment(cfg, threads=4)
        assert one.means == four.means
        assert one.stderr == four.stderr

    def test_seed_changes_estimates(self):
        """Test a different seed gives a different estimate."""
        assert run_experiment(_config(seed=1)).means != run_experiment(_config(seed=2)).means

    def test_full_profile_sums_to_one(self):
        """Test one pivot per replication: rank means sum to 1 at proper quotas."""
        result = run_experiment(_config(full_profile=True))
        for qi in range(len(result.config.quota_grid)):
            assert math.fsum(result.means[qi]) == pytest.approx(1.0, abs=1e-12)
        assert result.improper == [0, 0, 0, 0]

    def test_single_agent_always_pivotal(self):
        """Test n = 1 gives E[phi] = 1."""
        result = run_experiment(_config(n=1, quota_grid="0.5"))
        assert result.means == [[1.0]]
        assert result.stderr == [[0.0]]

    def test_exact_estimator_matches_one_perm(self):
        """Test the exact per-game estimator agrees with one order per game."""
        cfg = _config(n=4, quota_grid="0.3,0.6", reps=8000)
        sampled = run_experiment(cfg)
        exact = run_experiment(_config(n=4, quota_grid="0.3,0.6", reps=8000, estimator="exact", seed=321))
        for qi in range(2):
            for rank in (1, 4):
                assert _within(sampled.mean_at(qi, rank), sampled.stderr_at(qi, rank),
                               exact.mean_at(qi, rank), exact.stderr_at(qi, rank))

    def test_exact_estimator_profile_sums_to_one(self):
        """Test exact per-game profiles keep the unit sum."""
        result = run_experiment(_config(n=4, quota_grid="0.5", reps=2000, estimator="exact", full_profile=True))
        assert math.fsum(result.means[0]) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("dist", ["uniform:0,1", "exp:1"])
    def test_conditional_estimator_matches_one_perm(self, dist):
        """Test the conditional estimator against plain sampling on the natural model."""
        quota = 0.5 * 5 * (0.5 if dist.startswith("uniform") else 1.0)
        grid = str(quota)
        plain = run_experiment(_config(dist=dist, model="natural", quota_grid=grid, reps=20000))
        conditional = run_experiment(
            _config(dist=dist, model="natural", quota_grid=grid, reps=20000, estimator="conditional", seed=77)
        )
        assert conditional.ranks == [1, 5]
        for rank in (1, 5):
            assert _within(plain.mean_at(0, rank), plain.stderr_at(0, rank),
                           conditional.mean_at(0, rank), conditional.stderr_at(0, rank))

    def test_improper_replications_counted(self):
        """Test natural quotas above the sampled total are counted, not pivoted."""
        result = run_experiment(_config(n=2, model="natural", quota_grid="1.5", reps=10000))
        assert 0.85 < result.improper[0] / 10000 < 0.90
        assert result.mean_at(0, 1) + result.mean_at(0, 2) == pytest.approx(1 - result.improper[0] / 10000)
