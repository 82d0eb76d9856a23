"""Handles writing and reading rate reports, error traces and bound records."""

import csv
from dataclasses import asdict
import io
import json
import logging
import os
from pathlib import Path
from typing import List, Sequence

from .bench import RateAxis, RateReport, RateRow, StudyFailure
from .cascade import ErrorTrace
from .errors import ConfigError, ReportIOError
from .helpers import format_float

logger = logging.getLogger(__name__)

FORMATS = ("csv", "structured")
REPORT_COLUMNS = ["axis_value", "measured_error", "runtime_ms", "seed"]
TRACE_COLUMNS = ["layer", "per_layer_error", "cumulative_error"]


def _check_format(fmt: str):
    if fmt not in FORMATS:
        raise ConfigError(f"unknown report format '{fmt}', known: {', '.join(FORMATS)}")


def write_text(path, text: str):
    """Write text to path, creating parent directories."""
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            f.write(text)
    except OSError as err:
        raise ReportIOError(f"cannot write {path}: {err.strerror or err}") from err
    logger.info("Wrote %s", path)


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as err:
        raise ReportIOError(f"cannot read {path}: {err.strerror or err}") from err


def _report_record(report: RateReport) -> dict:
    record = asdict(report)
    record["axis"] = report.axis.value
    return record


def render_rows(report: RateReport) -> str:
    """CSV table of the report rows, floats printed with 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=",", lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows:
        writer.writerow(
            [
                row.axis_value,
                format_float(row.measured_error),
                format_float(row.runtime_ms),
                row.seed,
            ]
        )
    return buffer.getvalue()


def render_report(report: RateReport, fmt: str) -> str:
    """Render one report as CSV rows or as a structured JSON document."""
    _check_format(fmt)
    if fmt == "csv":
        return render_rows(report)
    return json.dumps(_report_record(report), indent=2, default=str) + "\n"


def render_reports(reports: Sequence[RateReport], fmt: str) -> str:
    """Render several reports; CSV tables are preceded by a '# function' line."""
    _check_format(fmt)
    if fmt == "structured":
        records = [_report_record(r) for r in reports]
        return json.dumps(records, indent=2, default=str) + "\n"
    if len(reports) == 1:
        return render_rows(reports[0])
    return "\n".join(f"# {r.function_name}\n{render_rows(r)}" for r in reports)


def emit_report(report: RateReport, path, fmt: str):
    """Write one report to path."""
    write_text(path, render_report(report, fmt))


def emit_reports(reports: Sequence[RateReport], path, fmt: str) -> List[str]:
    """Write reports to path; several CSV reports go to one file per function.

    Returns the paths written.
    """
    _check_format(fmt)
    if fmt == "structured" or len(reports) == 1:
        write_text(path, render_reports(reports, fmt))
        return [str(path)]
    stem, suffix = os.path.splitext(str(path))
    written = []
    for report in reports:
        target = f"{stem}_{report.function_name}{suffix or '.csv'}"
        write_text(target, render_rows(report))
        written.append(target)
    return written


def parse_rows(text: str) -> List[RateRow]:
    """Parse the CSV rows of a report."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != REPORT_COLUMNS:
        raise ReportIOError(f"unexpected report columns {reader.fieldnames}")
    return [
        RateRow(
            int(row["axis_value"]),
            float(row["measured_error"]),
            float(row["runtime_ms"]),
            int(row["seed"]),
        )
        for row in reader
    ]


def _report_from_record(record: dict) -> RateReport:
    return RateReport(
        function_name=record["function_name"],
        n=record["n"],
        declared_m=record["declared_m"],
        axis=RateAxis(record["axis"]),
        rows=[RateRow(**row) for row in record["rows"]],
        fitted_slope=record["fitted_slope"],
        config_echo=record["config_echo"],
        failures=[StudyFailure(**failure) for failure in record["failures"]],
        reference_slope=record["reference_slope"],
    )


def parse_report(text: str):
    """Parse a structured report document: one RateReport or a list of them."""
    try:
        data = json.loads(text)
        if isinstance(data, list):
            return [_report_from_record(record) for record in data]
        return _report_from_record(data)
    except (ValueError, KeyError, TypeError) as err:
        raise ReportIOError(f"malformed structured report: {err}") from err


def read_rows(path) -> List[RateRow]:
    """Read the rows of a CSV report."""
    return parse_rows(_read_text(path))


def read_report(path):
    """Read a structured report."""
    return parse_report(_read_text(path))


def render_trace(trace: ErrorTrace) -> str:
    """CSV table of an error trace, one line per layer."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=",", lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for layer, (error, cumulative) in enumerate(
        zip(trace.per_layer, trace.cumulative), start=1
    ):
        writer.writerow([layer, format_float(error), format_float(cumulative)])
    return buffer.getvalue()


def emit_trace(trace: ErrorTrace, path):
    """Write an error trace as CSV."""
    write_text(path, render_trace(trace))


def parse_trace(text: str) -> ErrorTrace:
    """Parse a trace CSV back into an ErrorTrace."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != TRACE_COLUMNS:
        raise ReportIOError(f"unexpected trace columns {reader.fieldnames}")
    rows = list(reader)
    return ErrorTrace(
        tuple(float(row["per_layer_error"]) for row in rows),
        tuple(float(row["cumulative_error"]) for row in rows),
    )


def render_record(record: dict) -> str:
    """Structured text of a flat record, such as a bound report."""
    return json.dumps(record, indent=2) + "\n"
