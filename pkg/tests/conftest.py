"""
Pytest configuration and fixtures for the WVG Shapley toolkit tests.

Provides weight laws, sample games, fast settings and a CLI runner shared by
the unit, integration and command-line suites.
"""

from pathlib import Path
from typing import List

import numpy as np
import pytest
from click.testing import CliRunner

from wvg_shapley.config.settings import Settings
from wvg_shapley.core.distributions import ConditionedLaw, ExponentialWeights, UniformWeights
from wvg_shapley.models.schemas import Game


@pytest.fixture
def uniform01() -> UniformWeights:
    """U(0, 1) weights."""
    return UniformWeights(0.0, 1.0)


@pytest.fixture
def exp1() -> ExponentialWeights:
    """Exp(1) weights."""
    return ExponentialWeights(1.0)


@pytest.fixture
def uniform_law(uniform01) -> ConditionedLaw:
    return ConditionedLaw.unconditioned(uniform01)


@pytest.fixture
def exp_law(exp1) -> ConditionedLaw:
    return ConditionedLaw.unconditioned(exp1)


@pytest.fixture
def fast_settings() -> Settings:
    """Settings sized for unit tests: few replications, small blocks, one thread."""
    return Settings(default_reps=4000, default_seed=7, block_size=1024, threads=1)


@pytest.fixture
def simple_game() -> Game:
    """Weights 1, 2, 3 at quota 4: values 1/6, 1/6, 2/3."""
    return Game(weights=[3, 1, 2], quota=4)


@pytest.fixture
def random_games() -> List[Game]:
    """200 random games with n in 2..8 and quotas inside (0, total]."""
    rng = np.random.default_rng(2024)
    games = []
    for _ in range(200):
        n = int(rng.integers(2, 9))
        weights = rng.uniform(0.05, 1.0, n)
        quota = float(rng.uniform(0.01, 1.0) * weights.sum())
        games.append(Game(weights=weights.tolist(), quota=quota))
    return games


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def fast_config(tmp_path: Path) -> Path:
    """KEY=value config file with small replication counts and blocks."""
    path = tmp_path / "fast.env"
    path.write_text(
        "WVG_DEFAULT_REPS=2000\n"
        "WVG_DEFAULT_SEED=11\n"
        "WVG_BLOCK_SIZE=256\n",
        encoding="utf-8",
    )
    return path
