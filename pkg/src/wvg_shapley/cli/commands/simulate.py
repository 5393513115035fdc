"""Monte Carlo estimates of expected Shapley values over sampled games."""

from typing import Optional

import click

from ...models.schemas import Estimator, WeightModel
from ...services.experiment_service import ExperimentService
from ..output import SEED, emit, resolve_format, utc_now


@click.command("simulate")
@click.option("--dist", required=True, help="Weight law: uniform:a,b or exp:rate")
@click.option("--n", "n", required=True, type=int, help="Number of agents")
@click.option("--model", type=click.Choice([m.value for m in WeightModel]), default="normalized", show_default=True)
@click.option("--quota-grid", default="0.05:0.95:0.05", show_default=True, help="start:stop:step or a comma list")
@click.option("--reps", type=int, default=None, help="Replications (default from settings)")
@click.option("--seed", type=SEED, default=None, help="Root seed (default from settings)")
@click.option("--estimator", type=click.Choice([e.value for e in Estimator]), default="one_perm", show_default=True)
@click.option("--full-profile", is_flag=True, help="Report every rank, not only max and min")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")
@click.pass_context
def simulate(
    ctx: click.Context,
    dist: str,
    n: int,
    model: str,
    quota_grid: str,
    reps: Optional[int],
    seed: Optional[int],
    estimator: str,
    full_profile: bool,
    fmt: Optional[str],
    out: Optional[str],
):
    """Estimate E[phi_rank] on a quota grid."""
    started_at = utc_now()
    state = ctx.obj
    service = ExperimentService(state.settings, state.threads)
    cfg = service.build_config(
        dist=dist,
        n=n,
        model=model,
        quota_grid=quota_grid,
        reps=reps,
        seed=seed,
        estimator=estimator,
        full_profile=full_profile,
    )
    result = service.run_experiment(cfg)

    rows = result.rows()
    document = {
        "config": cfg.model_dump(mode="json"),
        "improper": result.improper,
        "rows": rows,
    }
    emit(ctx, "simulation", rows, document, resolve_format(state, fmt), out, started_at, cfg.seed)
