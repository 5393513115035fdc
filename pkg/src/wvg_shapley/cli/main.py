"""
Command-line entry point.

One group with a subcommand per workflow: exact and sampled Shapley values,
Monte Carlo experiments, predictions, renewal estimates, comparisons, figure
recipes and manifest replay.
"""

import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from .. import __version__
from ..config.settings import Settings, get_settings
from ..models.exceptions import WVGShapleyError
from .commands import compare, figure, predict, renewal, replay, shapley, simulate
from .output import CliState

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


def configure_logging(settings: Settings) -> None:
    """Configure stderr logging once per process."""
    logging.basicConfig(level=settings.log_level, format=settings.log_format)
    logging.getLogger("wvg_shapley").setLevel(settings.log_level)


class ToolkitGroup(click.Group):
    """Maps toolkit exceptions to exit codes: 2 config, 3 convergence, 4 IO."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except WVGShapleyError as e:
            logger.error(f"{e.__class__.__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            logger.error(f"Validation Error: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(2)
        except OSError as e:
            logger.error(f"IO Error: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(4)


@click.group(cls=ToolkitGroup)
@click.option(
    "--config",
    "config_file",
    type=click.Path(dir_okay=False),
    default=None,
    help="KEY=value settings file (WVG_ prefixed keys)",
)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads; never changes results")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None)
@click.version_option(__version__, prog_name="wvg-shapley")
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[str], threads: Optional[int], log_level: Optional[str]):
    """Shapley values in weighted voting games with random weights."""
    settings = get_settings(Path(config_file) if config_file else None)
    if log_level:
        settings = settings.model_copy(update={"log_level": log_level.upper()})
    configure_logging(settings)
    ctx.obj = CliState(settings=settings, threads=threads if threads is not None else settings.threads)
    logger.debug(f"{settings.app_name} {settings.app_version}, threads={ctx.obj.threads}")


cli.add_command(shapley.shapley)
cli.add_command(simulate.simulate)
cli.add_command(predict.predict)
cli.add_command(renewal.renewal)
cli.add_command(compare.compare)
cli.add_command(figure.figure)
cli.add_command(replay.replay)


def run() -> None:
    """Console script entry point."""
    cli(prog_name="wvg-shapley")


if __name__ == "__main__":
    run()
