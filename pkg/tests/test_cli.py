"""Tests for the command line interface."""

import json

import pytest

from layerapprox import __version__
from layerapprox.cli import main
from layerapprox.report import parse_trace, read_rows

QUICK = ["--restarts", "1", "--iterations", "50"]


def run(capsys, *argv):
    """Run the CLI and return (exit code, stdout, stderr)."""
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_hilbert_encode_decode(capsys):
    """Indices and cells convert both ways."""
    assert run(capsys, "hilbert", "encode", "-d", "2", "-k", "1", "0", "1") == (0, "1\n", "")
    assert run(capsys, "hilbert", "decode", "-d", "2", "-k", "1", "2") == (0, "1 1\n", "")
    code, out, _ = run(capsys, "hilbert", "snap", "-k", "3", "1", "1")
    assert code == 0
    assert out.split()[1:] == ["0.9375", "0.9375"]


def test_hilbert_errors(capsys):
    """Out of range values and wide indices have their own exit codes."""
    code, out, err = run(capsys, "hilbert", "decode", "-d", "2", "-k", "1", "4")
    assert (code, out) == (6, "")
    assert err.startswith("error: domain: ")
    code, _, err = run(capsys, "hilbert", "encode", "-d", "5", "-k", "13", "0", "0", "0", "0", "0")
    assert code == 7
    assert err.startswith("error: precision: ")


def test_corpus_and_config(capsys):
    """The corpus lists its functions and flags show up in the configuration."""
    code, out, _ = run(capsys, "corpus", "list")
    assert code == 0
    assert out.splitlines()[0] == "name,n,smoothness_m,lipschitz_L,description"
    assert any(line.startswith("tanh2x,1,2,2,") for line in out.splitlines())
    code, out, _ = run(capsys, "config", "show", "--seed", "5")
    assert code == 0
    assert json.loads(out)["seed"] == 5


def test_fit_shallow_zero(capsys):
    """A zero target is fitted exactly."""
    code, out, _ = run(
        capsys, "fit-shallow", "--function", "zero1d", "--units", "2", "--grid-points", "9", *QUICK
    )
    assert code == 0
    assert out == "function,units,parameter_count,measured_error\nzero1d,2,6,0\n"


def test_fit_cascade_writes_trace_and_model(capsys, tmp_path):
    """The trace goes to --out and the model to --model-out."""
    out_path = tmp_path / "trace.csv"
    model_path = tmp_path / "model.json"
    code, out, _ = run(
        capsys,
        "fit-cascade",
        "--function",
        "tanh2x",
        "--layers",
        "2",
        "--width",
        "2",
        "--grid-points",
        "17",
        "--out",
        str(out_path),
        "--model-out",
        str(model_path),
        *QUICK,
    )
    assert (code, out) == (0, "")
    trace = parse_trace(out_path.read_text())
    assert 1 <= len(trace.per_layer) <= 2
    assert json.loads(model_path.read_text())["kind"] == "cascade"


def test_fit_layernet_bound_report(capsys):
    """Narrow layer networks report their error decomposition."""
    code, out, _ = run(
        capsys,
        "fit-layernet",
        "--function",
        "plane2d",
        "--width",
        "1",
        "--layers",
        "1",
        "--hilbert-level",
        "4",
        "--grid-points",
        "9",
        "--format",
        "structured",
        *QUICK,
    )
    assert code == 0
    document = json.loads(out)
    bound = document["bound_report"]
    assert bound["lipschitz_source"] == "analytic"
    assert bound["total_measured"] <= (
        bound["projection_term_scaled"] + bound["reduced_error"] + 1e-6
    )
    assert len(document["per_layer"]) == 1


def test_rate_study_is_byte_identical(capsys, tmp_path):
    """Reruns with the same configuration write the same file."""
    paths = [tmp_path / "first.csv", tmp_path / "second.csv"]
    for path in paths:
        code, _, _ = run(
            capsys,
            "rate-study",
            "--functions",
            "tanh2x",
            "--widths",
            "2,4",
            "--grid-points",
            "17",
            "--out",
            str(path),
            *QUICK,
        )
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert [row.axis_value for row in read_rows(paths[0])] == [2, 4]


def test_configuration_errors(capsys, tmp_path):
    """Unknown functions and settings exit with the configuration code."""
    code, _, err = run(capsys, "fit-shallow", "--function", "nope", *QUICK)
    assert code == 2
    assert err.startswith("error: config: unknown function 'nope'")
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "config", "show", "--config", str(config))
    assert code == 2
    assert "bogus" in err


def test_version(capsys):
    """--version prints the packaged version."""
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == f"layerapprox {__version__}"


def test_config_file_types_are_checked(capsys, tmp_path):
    """A mistyped config value is a configuration error, not a crash."""
    config = tmp_path / "run.json"
    for values in ({"widths": "24"}, {"functions": "tanh2x"}):
        config.write_text(json.dumps(values))
        code, out, err = run(capsys, "rate-study", "--config", str(config), *QUICK)
        assert (code, out) == (2, "")
        assert err.startswith("error: config: setting ")
        assert len(err.splitlines()) == 1


def test_usage_errors_are_one_line(capsys):
    """Bad flags and missing commands print a single config error line."""
    for argv in (
        ["fit-shallow", "--units", "many"],
        ["rate-study", "--widths", "2,x"],
        ["no-such-command"],
        [],
    ):
        code, out, err = run(capsys, *argv)
        assert (code, out) == (2, ""), argv
        assert err.startswith("error: config: "), argv
        assert len(err.splitlines()) == 1, argv
