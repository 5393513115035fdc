"""Re-execute a run from its manifest."""

import logging
from dataclasses import replace
from pathlib import Path

import click
from pydantic import ValidationError

from ...config.settings import Settings
from ...models.exceptions import OutputError
from ...services.report_service import ReportService

logger = logging.getLogger(__name__)


@click.command("replay")
@click.option("--manifest", "manifest_file", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def replay(ctx: click.Context, manifest_file: str):
    """Re-run the recorded subcommand with its recorded settings and parameters."""
    manifest = ReportService().read_manifest(Path(manifest_file))
    root = ctx.find_root()
    command = root.command.get_command(root, manifest.subcommand)
    if command is None or manifest.subcommand == ctx.command.name:
        raise OutputError(f"Manifest names an unknown subcommand '{manifest.subcommand}'")

    try:
        settings = Settings(**manifest.settings)
    except ValidationError as e:
        raise OutputError(f"Manifest settings are invalid: {e}") from e

    logger.info(f"Replaying {manifest.subcommand} from {manifest_file} (recorded {manifest.started_at})")
    ctx.obj = replace(ctx.obj, settings=settings)
    ctx.invoke(command, **manifest.parameters)
