"""
Shared state and output plumbing for the CLI subcommands.

Data goes to ``--out`` (with a manifest sidecar) or to stdout; logs go to
stderr.
"""

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import click

from .. import __version__
from ..config.settings import Settings
from ..models.schemas import OutputFormat, RunManifest
from ..services.report_service import ReportService, render_json

logger = logging.getLogger(__name__)

# Seeds feed numpy SeedSequence, which takes unsigned 64-bit entropy.
SEED = click.IntRange(min=0, max=2**64 - 1)


@dataclass
class CliState:
    """Effective settings and worker count shared by every subcommand."""
    settings: Settings
    threads: Optional[int] = None


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def resolve_format(state: CliState, fmt: Optional[str]) -> OutputFormat:
    return OutputFormat(fmt or state.settings.output_format)


def record_manifest(
    ctx: click.Context,
    outputs: List[Path],
    started_at: datetime,
    seed: Optional[int] = None,
) -> Path:
    """Write the manifest next to the first output file."""
    state: CliState = ctx.obj
    manifest = RunManifest(
        subcommand=ctx.command.name,
        parameters=dict(ctx.params),
        settings=state.settings.model_dump(mode="json"),
        seed=seed,
        version=__version__,
        started_at=started_at,
        finished_at=utc_now(),
        outputs=[str(p) for p in outputs],
        threads=state.threads,
    )
    return ReportService().write_manifest(outputs[0], manifest)


def emit(
    ctx: click.Context,
    kind: str,
    rows: Iterable[Dict[str, Any]],
    document: Any,
    fmt: OutputFormat,
    out: Optional[str],
    started_at: datetime,
    seed: Optional[int] = None,
) -> None:
    """Write rows as CSV or the document as JSON, to ``out`` or stdout."""
    report = ReportService()
    if out is None:
        stream = click.get_text_stream("stdout")
        if fmt is OutputFormat.JSON:
            stream.write(render_json(document))
        else:
            report.write_rows(stream, kind, rows)
        stream.flush()
        return

    path = Path(out)
    if fmt is OutputFormat.JSON:
        report.write_json(path, document)
    else:
        report.write_csv(path, kind, rows)
    record_manifest(ctx, [path], started_at, seed)
