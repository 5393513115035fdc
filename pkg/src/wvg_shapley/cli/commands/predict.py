"""Theoretical predictions for the extreme ranks and rank-p agents."""

from typing import Optional

import click

from ...models.schemas import PredictionMethod, PredictionTarget
from ...services.prediction_service import PredictionService
from ..output import emit, resolve_format, utc_now


@click.command("predict")
@click.option("--dist", required=True, help="Weight law: uniform:a,b or exp:rate")
@click.option("--n", "n", type=int, default=None, help="Number of agents (omit for the n -> inf rank limit)")
@click.option("--target", type=click.Choice([t.value for t in PredictionTarget]), default="max", show_default=True)
@click.option("--p", "p", type=float, default=None, help="Rank position in (0, 1] for --target rank")
@click.option("--method", type=click.Choice([m.value for m in PredictionMethod]), default="auto", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")
@click.pass_context
def predict(
    ctx: click.Context,
    dist: str,
    n: Optional[int],
    target: str,
    p: Optional[float],
    method: str,
    fmt: Optional[str],
    out: Optional[str],
):
    """Predicted E[phi] for the max, min or rank-p agent."""
    started_at = utc_now()
    state = ctx.obj
    service = PredictionService(state.settings)
    prediction = service.predict(dist, n, PredictionTarget(target), p=p, method=PredictionMethod(method))

    document = prediction.model_dump(mode="json")
    document["limits"] = service.limit_values(dist).model_dump(mode="json")
    emit(ctx, "prediction", [prediction.row()], document, resolve_format(state, fmt), out, started_at)
