"""Shapley values of a single weighted voting game."""

from typing import Optional

import click
from pydantic import ValidationError

from ...models.exceptions import ConfigurationError
from ...models.schemas import Game, ShapleyMethod
from ...services.experiment_service import ExperimentService
from ..output import SEED, emit, resolve_format, utc_now

METHODS = {
    "perm": ShapleyMethod.EXACT_PERM,
    "subset": ShapleyMethod.EXACT_SUBSET,
    "sample": ShapleyMethod.SAMPLED_PERM,
}


@click.command("shapley")
@click.option("--weights", required=True, help="Comma-separated weights, e.g. 1,2,3")
@click.option("--quota", required=True, type=float, help="Quota on the weight scale")
@click.option("--method", type=click.Choice(list(METHODS)), default="subset", show_default=True)
@click.option("--samples", type=int, default=None, help="Permutations for --method sample")
@click.option("--seed", type=SEED, default=None, help="Root seed for --method sample")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")
@click.pass_context
def shapley(
    ctx: click.Context,
    weights: str,
    quota: float,
    method: str,
    samples: Optional[int],
    seed: Optional[int],
    fmt: Optional[str],
    out: Optional[str],
):
    """Exact or sampled Shapley values of one game, by rank."""
    started_at = utc_now()
    state = ctx.obj
    try:
        game = Game.from_literal(weights, quota)
    except (ValidationError, ValueError) as e:
        raise ConfigurationError(f"Invalid game: {e}") from e

    service = ExperimentService(state.settings, state.threads)
    profile = service.shapley_profile(game, METHODS[method], samples=samples, seed=seed)
    resolved_seed = None
    if profile.method is ShapleyMethod.SAMPLED_PERM:
        resolved_seed = state.settings.default_seed if seed is None else seed
    emit(ctx, "profile", profile.rows(), profile.to_document(), resolve_format(state, fmt), out, started_at,
         resolved_seed)
