"""Report export (JSON, TSV, SVG) and JSON loading."""
import csv
import json
import logging
from pathlib import Path
from typing import Union

from app.models.schemas import Record, Report
from app.services.errors import InputError
from app.storage import plots

logger = logging.getLogger(__name__)

FORMATS = {
    "structured-object": "json",
    "tabular-text": "tsv",
    "vector-plot": "svg",
}

RECORD_COLUMNS = tuple(Record.model_fields)


def _format(name: str) -> str:
    if name in FORMATS:
        return FORMATS[name]
    if name in FORMATS.values():
        return name
    raise InputError(f"unknown export format '{name}'; expected one of {sorted(FORMATS)}")


def _cell(record: Record, column: str) -> str:
    value = getattr(record, column)
    if value is None:
        return ""
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _headline(record: Record) -> float:
    """First finite numeric output, for the summary plot."""
    for value in record.outputs.values():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    return float("nan")


def export(report: Report, fmt: str, path: Union[str, Path]) -> Path:
    """Write ``report`` in one of the three formats; returns the written path."""
    kind = _format(fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if kind == "json":
            path.write_text(report.model_dump_json(indent=2) + "\n")
        elif kind == "tsv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
                writer.writerow(RECORD_COLUMNS)
                for record in report.records:
                    writer.writerow([_cell(record, c) for c in RECORD_COLUMNS])
        else:
            labels = [f"{r.command}#{k}" for k, r in enumerate(report.records)]
            plots.record_summary(labels, [_headline(r) for r in report.records],
                                 [None if r.error else r.passed for r in report.records],
                                 path, title=f"{report.provenance.space_name} records")
    except OSError as exc:
        raise InputError(f"cannot write report to '{path}': {exc}") from None
    logger.info(f"wrote {kind} report to {path}")
    return path


def load_report(path: Union[str, Path]) -> Report:
    path = Path(path)
    try:
        return Report.model_validate_json(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read report '{path}': {exc}") from None
