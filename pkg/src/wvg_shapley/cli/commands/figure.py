"""Preset batches emitting plot-ready datasets."""

from pathlib import Path
from typing import Optional

import click

from ...models.schemas import FigureName
from ...services.comparison_service import ComparisonService
from ...services.report_service import ReportService
from ..output import SEED, record_manifest, utc_now


@click.command("figure")
@click.argument("name", type=click.Choice([f.value for f in FigureName]))
@click.option("--reps", type=int, default=None, help="Replications per sub-run (default from settings)")
@click.option("--seed", type=SEED, default=None, help="Root seed (default from settings)")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.pass_context
def figure(ctx: click.Context, name: str, reps: Optional[int], seed: Optional[int], out_dir: str):
    """Run a figure recipe and write <name>_data.csv with its manifest."""
    started_at = utc_now()
    state = ctx.obj
    rows = ComparisonService(state.settings, state.threads).figure_recipe(FigureName(name), reps=reps, seed=seed)

    path = ReportService().write_csv(Path(out_dir) / f"{name}_data.csv", "figure", [r.model_dump() for r in rows])
    record_manifest(ctx, [path], started_at, state.settings.default_seed if seed is None else seed)
    click.echo(str(path))
