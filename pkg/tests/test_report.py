"""Tests for report and trace files."""

import pytest

from layerapprox.bench import RateAxis, RateReport, RateRow, StudyFailure
from layerapprox.cascade import ErrorTrace
from layerapprox.errors import ConfigError, ReportIOError
from layerapprox.report import (
    REPORT_COLUMNS,
    emit_report,
    emit_reports,
    emit_trace,
    parse_trace,
    read_report,
    read_rows,
    render_record,
    render_reports,
)


def make_report(name="tanh2x", rows=None):
    """Width report with a few rows."""
    if rows is None:
        rows = [
            RateRow(2, 1 / 3, 0.0, 0, parameter_count=6),
            RateRow(4, 0.1, 12.5, 1, parameter_count=12),
            RateRow(8, 2.0**-40, 0.0, 2, parameter_count=24),
        ]
    return RateReport(
        function_name=name,
        n=1,
        declared_m=2,
        axis=RateAxis.WIDTH,
        rows=rows,
        fitted_slope=-1.25,
        config_echo={"seed": 0, "widths": [2, 4, 8]},
        failures=[StudyFailure(16, 3, "divergence", "all 2 candidates diverged")],
        reference_slope=-2.0,
    )


def test_empty_report_is_header_only(tmp_path):
    """A report without rows is just the header."""
    path = tmp_path / "empty.csv"
    emit_report(make_report(rows=[]), path, "csv")
    assert path.read_text() == ",".join(REPORT_COLUMNS) + "\n"
    assert read_rows(path) == []


def test_csv_rows_round_trip_exactly(tmp_path):
    """Seventeen digits bring 1/3 back bit for bit."""
    report = make_report()
    path = tmp_path / "rows.csv"
    emit_report(report, path, "csv")
    rows = read_rows(path)
    assert rows[0].measured_error == 1 / 3
    assert [(r.axis_value, r.measured_error, r.runtime_ms, r.seed) for r in rows] == [
        (r.axis_value, r.measured_error, r.runtime_ms, r.seed) for r in report.rows
    ]


def test_structured_report_round_trip(tmp_path):
    """The structured form keeps every field."""
    report = make_report()
    path = tmp_path / "report.json"
    emit_report(report, path, "structured")
    assert read_report(path) == report


def test_several_reports(tmp_path):
    """Several CSV reports go to one file per function."""
    reports = [make_report("tanh2x"), make_report("bump1d")]
    written = emit_reports(reports, tmp_path / "study.csv", "csv")
    assert written == [str(tmp_path / "study_tanh2x.csv"), str(tmp_path / "study_bump1d.csv")]
    assert len(read_rows(written[1])) == 3
    text = render_reports(reports, "csv")
    assert text.startswith("# tanh2x\n")
    assert "# bump1d\n" in text
    (path,) = emit_reports(reports, tmp_path / "study.json", "structured")
    assert read_report(path) == reports


def test_trace_round_trip(tmp_path):
    """Traces survive writing and parsing."""
    trace = ErrorTrace.from_errors([0.3, 1 / 3, 0.7])
    path = tmp_path / "trace.csv"
    emit_trace(trace, path)
    assert parse_trace(path.read_text()) == trace


def test_unwritable_and_unreadable_paths(tmp_path):
    """I/O failures name the path."""
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError, match="file"):
        emit_report(make_report(), blocker / "report.csv", "csv")
    with pytest.raises(ReportIOError, match="missing"):
        read_rows(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ReportIOError):
        read_rows(bad)
    bad.write_text("{not json")
    with pytest.raises(ReportIOError):
        read_report(bad)


def test_unknown_format(tmp_path):
    """Only csv and structured are known."""
    with pytest.raises(ConfigError):
        emit_report(make_report(), tmp_path / "r.txt", "xml")


def test_render_record():
    """Records render as indented JSON."""
    assert render_record({"a": 1}) == '{\n  "a": 1\n}\n'
