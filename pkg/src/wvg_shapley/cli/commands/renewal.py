"""Renewal function estimates against the linear asymptote."""

from typing import Optional

import click

from ...models.exceptions import ConfigurationError
from ...models.schemas import RenewalMethod, parse_quota_grid
from ...services.renewal_service import RenewalService
from ..output import SEED, emit, resolve_format, utc_now


@click.command("renewal")
@click.option("--dist", required=True, help="Weight law: uniform:a,b or exp:rate")
@click.option("--cond", default=None, help="Conditioning: below:x, above:x or mix:p,x")
@click.option("--q-grid", default="1:10:1", show_default=True, help="start:stop:step or a comma list")
@click.option("--reps", type=int, default=None, help="Replications for --method mc")
@click.option("--seed", type=SEED, default=None, help="Root seed for --method mc")
@click.option("--method", type=click.Choice([m.value for m in RenewalMethod]), default="mc", show_default=True)
@click.option("--decay", is_flag=True, help="Fit the residual decay slope (needs 4+ quotas)")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")
@click.pass_context
def renewal(
    ctx: click.Context,
    dist: str,
    cond: Optional[str],
    q_grid: str,
    reps: Optional[int],
    seed: Optional[int],
    method: str,
    decay: bool,
    fmt: Optional[str],
    out: Optional[str],
):
    """m(Q), asymptote and residual over a quota grid."""
    started_at = utc_now()
    state = ctx.obj
    try:
        grid = parse_quota_grid(q_grid)
    except ValueError as e:
        raise ConfigurationError(f"Invalid --q-grid: {e}") from e

    service = RenewalService(state.settings, state.threads)
    law = service.law(dist, cond)
    renewal_method = RenewalMethod(method)
    if decay:
        report = service.decay_report(law, grid, renewal_method, reps, seed)
        summary = report.summary
        document = report.model_dump(mode="json")
    else:
        summary = service.summarize(law, grid, renewal_method, reps, seed)
        document = summary.model_dump(mode="json")

    rows = [point.row() for point in summary.points]
    emit(ctx, "renewal", rows, document, resolve_format(state, fmt), out, started_at, summary.seed)
