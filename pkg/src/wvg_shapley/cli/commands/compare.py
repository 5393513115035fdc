"""Simulation estimates joined with theoretical predictions."""

from typing import Optional, Tuple

import click

from ...models.schemas import Estimator
from ...services.comparison_service import ComparisonService
from ..output import SEED, emit, resolve_format, utc_now


@click.command("compare")
@click.option("--dist", required=True, help="Weight law: uniform:a,b or exp:rate")
@click.option("--n", "n_values", required=True, type=int, multiple=True, help="Number of agents (repeatable)")
@click.option("--quota-grid", default="0.1:0.9:0.1", show_default=True, help="Normalized quotas")
@click.option("--reps", type=int, default=None, help="Replications (default from settings)")
@click.option("--seed", type=SEED, default=None, help="Root seed (default from settings)")
@click.option("--model", type=click.Choice(["normalized", "natural", "both"]), default="normalized", show_default=True)
@click.option("--estimator", type=click.Choice([e.value for e in Estimator]), default="one_perm", show_default=True)
@click.option("--full-profile", is_flag=True, help="Also compare every interior rank")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")
@click.pass_context
def compare(
    ctx: click.Context,
    dist: str,
    n_values: Tuple[int, ...],
    quota_grid: str,
    reps: Optional[int],
    seed: Optional[int],
    model: str,
    estimator: str,
    full_profile: bool,
    fmt: Optional[str],
    out: Optional[str],
):
    """Deviation of simulated from predicted values, in standard errors."""
    started_at = utc_now()
    state = ctx.obj
    service = ComparisonService(state.settings, state.threads)
    report = service.compare(
        dist,
        list(n_values),
        quota_grid,
        reps=reps,
        seed=seed,
        model=model,
        estimator=Estimator(estimator),
        full_profile=full_profile,
    )

    rows = [row.model_dump() for row in report.rows]
    resolved_seed = state.settings.default_seed if seed is None else seed
    emit(ctx, "compare", rows, report.model_dump(mode="json"), resolve_format(state, fmt), out, started_at,
         resolved_seed)
    click.echo(report.summary, err=True)
