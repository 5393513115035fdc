"""
Report Service Layer

Writes plot-ready CSV and JSON outputs with their run manifests, reads
manifests back for replay, and checks emitted CSV files against the strict
record layouts.
"""

import csv
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, TextIO, Type

from pydantic import ValidationError

from ..models.exceptions import OutputError
from ..models.schemas import (
    ComparisonRow,
    CsvRecord,
    FigureRow,
    PredictionRecord,
    ProfileRecord,
    RenewalRecord,
    RunManifest,
    SimulationRecord,
)

logger = logging.getLogger(__name__)

RECORD_LAYOUTS: Dict[str, Type[CsvRecord]] = {
    "simulation": SimulationRecord,
    "profile": ProfileRecord,
    "prediction": PredictionRecord,
    "renewal": RenewalRecord,
    "compare": ComparisonRow,
    "figure": FigureRow,
}

MANIFEST_SUFFIX = ".manifest.json"


def _cell(value: Any) -> str:
    """Text for one CSV cell; floats keep their shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_json(document: Any) -> str:
    """Indented JSON text; NaN and infinity are rejected."""
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def manifest_path(output: Path) -> Path:
    return Path(f"{output}{MANIFEST_SUFFIX}")


def _layout(kind: str) -> Type[CsvRecord]:
    try:
        return RECORD_LAYOUTS[kind]
    except KeyError as e:
        raise OutputError(f"Unknown CSV layout '{kind}' (known: {', '.join(RECORD_LAYOUTS)})") from e


class ReportService:
    """Service for result files, manifests and schema checks."""

    def write_rows(self, handle: TextIO, kind: str, rows: Iterable[Dict[str, Any]]) -> int:
        """Write a header and rows in the column order of the ``kind`` layout."""
        columns = _layout(kind).columns()
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow({c: _cell(row.get(c)) for c in columns})
            count += 1
        return count

    def write_csv(self, path: Path, kind: str, rows: Iterable[Dict[str, Any]]) -> Path:
        """
        Write a CSV file for the ``kind`` layout.

        Raises:
            OutputError: If the file cannot be written
        """
        _layout(kind)
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="", encoding="utf-8") as handle:
                count = self.write_rows(handle, kind, rows)
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}") from e

        logger.info(f"Wrote {count} {kind} rows to {path}")
        return path

    def write_json(self, path: Path, document: Any) -> Path:
        """Write a JSON document (UTF-8, indented)."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(render_json(document), encoding="utf-8")
        except (OSError, ValueError) as e:
            raise OutputError(f"Cannot write {path}: {e}") from e
        logger.info(f"Wrote JSON to {path}")
        return path

    def write_manifest(self, output: Path, manifest: RunManifest) -> Path:
        """Write ``<output>.manifest.json`` next to the output file."""
        path = manifest_path(Path(output))
        try:
            path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Cannot write manifest {path}: {e}") from e
        logger.info(f"Wrote manifest {path}")
        return path

    def read_manifest(self, path: Path) -> RunManifest:
        """
        Load a manifest for replay.

        Raises:
            OutputError: If the file is missing or not a valid manifest
        """
        path = Path(path)
        try:
            return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise OutputError(f"Cannot read manifest {path}: {e}") from e
        except ValidationError as e:
            raise OutputError(f"Invalid manifest {path}: {e}") from e

    def validate_csv(self, path: Path, kind: str) -> int:
        """
        Check a CSV file against its record layout: exact header, typed cells,
        no NaN or infinity. Returns the number of data rows.

        Raises:
            OutputError: On the first violation
        """
        layout = _layout(kind)
        path = Path(path)
        try:
            with path.open(newline="", encoding="utf-8") as handle:
                reader = csv.DictReader(handle)
                if reader.fieldnames != layout.columns():
                    raise OutputError(
                        f"{path}: header {reader.fieldnames} does not match {layout.columns()}"
                    )
                count = 0
                for line, row in enumerate(reader, start=2):
                    try:
                        layout.model_validate(row)
                    except ValidationError as e:
                        raise OutputError(f"{path}:{line}: {e}") from e
                    count += 1
        except OSError as e:
            raise OutputError(f"Cannot read {path}: {e}") from e

        logger.debug(f"{path}: {count} valid {kind} rows")
        return count
