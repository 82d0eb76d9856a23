"""Command line entry point."""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time

from .bench import compare_depth_width, depth_study, hilbert_k_study, rate_study_shallow
from .cascade import train_cascade
from .core_math import CORPUS, get_function
from .errors import ApproxError, ConfigError
from .helpers import elapsed, format_float, getVersion, point_count
from .hilbert import CellCoord, HilbertIndex, decode, encode, snap_point
from .layernet import train_layernet_ge, train_layernet_lt
from .report import (
    FORMATS,
    emit_reports,
    render_record,
    render_reports,
    render_rows,
    render_trace,
    write_text,
)
from .settings import Settings, save_settings
from .shallow import fit_shallow
from .store import ModelStore

logger = logging.getLogger(__name__)

# argparse destinations that are not settings
_NOT_SETTINGS = {
    "command",
    "action",
    "config",
    "verbose",
    "dims",
    "level",
    "values",
}


def init_logger(level="WARNING"):
    """Initialize the root logger to log to stderr."""
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        if getattr(handler, "layerapprox", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.layerapprox = True
    handler.setLevel(level)
    formatter = logging.Formatter(
        "%(asctime)s - %(levelname)s - %(funcName)s -  %(message)s",
        datefmt="%Y.%m.%d %H:%M:%S",
    )
    handler.setFormatter(formatter)
    root.addHandler(handler)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma separated integers, got '{text}'"
        ) from None


def _name_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _common_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat JSON file with setting overrides")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument(
        "--grid-points", dest="grid_points", type=int, help="grid points per dimension"
    )
    common.add_argument("--out", help="write results to this file instead of stdout")
    common.add_argument("--format", choices=FORMATS, help="output format")
    common.add_argument("--model-out", dest="model_out", help="save the trained model here")
    common.add_argument(
        "--record-runtime",
        dest="record_runtime",
        action="store_true",
        help="record wall clock times in reports",
    )
    common.add_argument("-v", "--verbose", action="count", default=0, help="log more")
    return common


def _training_parser():
    training = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    training.add_argument("--restarts", type=int)
    training.add_argument("--iterations", type=int)
    training.add_argument("--step-size", dest="step_size", type=float)
    training.add_argument("--step-decay", dest="step_decay", type=float)
    training.add_argument("--init-scale", dest="init_scale", type=float)
    training.add_argument("--optimizer", choices=("adam", "gd"))
    training.add_argument("--activation", choices=("logistic", "tanh", "softplus"))
    training.add_argument(
        "--train-points",
        dest="train_points_per_dim",
        type=int,
        help="separate training lattice density",
    )
    return training


def _chain_parser():
    chain = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    chain.add_argument("--tau", type=float, help="smallest allowed singular value")
    chain.add_argument("--tol", type=float, help="reconstruction tolerance")
    chain.add_argument(
        "--chain-activation", dest="chain_activation", choices=("logistic", "tanh")
    )
    chain.add_argument(
        "--mode", dest="layernet_mode", help="feature mode of the approximation layers"
    )
    return chain


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors become configuration errors."""

    def error(self, message):
        """Raise instead of printing usage and exiting."""
        raise ConfigError(message)


def _command(subparsers, name, **kwargs):
    return subparsers.add_parser(name, argument_default=argparse.SUPPRESS, **kwargs)


def build_parser() -> ArgumentParser:
    """Build the argument parser."""
    common = _common_parser()
    training = _training_parser()
    chain = _chain_parser()
    parser = ArgumentParser(
        prog="layerapprox",
        description="Approximate functions on [-1, 1]^n with shallow, cascade and layer networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {getVersion()}")
    commands = parser.add_subparsers(dest="command", required=True)

    hilbert = _command(commands, "hilbert", help="Hilbert curve utilities")
    actions = hilbert.add_subparsers(dest="action", required=True)
    for name, value_type, help_text in (
        ("encode", int, "cell coordinates to index"),
        ("decode", int, "index to cell coordinates"),
        ("snap", float, "point of [0, 1]^d to index and cell centre"),
    ):
        action = _command(actions, name, parents=[common], help=help_text)
        if name != "snap":
            action.add_argument("-d", "--dims", type=int, required=True)
        action.add_argument("-k", "--level", type=int, required=True)
        action.add_argument("values", type=value_type, nargs="+")

    fit = _command(
        commands, "fit-shallow", parents=[common, training], help="fit a shallow net"
    )
    fit.add_argument("--function")
    fit.add_argument("--units", type=int)

    cascade = _command(
        commands, "fit-cascade", parents=[common, training], help="train a residual cascade"
    )
    cascade.add_argument("--function")
    cascade.add_argument("--layers", type=int)
    cascade.add_argument("--width", type=int)
    cascade.add_argument("--mode")

    layernet = _command(
        commands, "fit-layernet", parents=[common, training, chain], help="train a layer network"
    )
    layernet.add_argument("--function")
    layernet.add_argument("--layers", type=int)
    layernet.add_argument("--width", type=int)
    layernet.add_argument("--hilbert-level", dest="hilbert_level", type=int)

    rate = _command(
        commands, "rate-study", parents=[common, training], help="error against width"
    )
    rate.add_argument("--functions", type=_name_list)
    rate.add_argument("--widths", type=_int_list)

    depth = _command(
        commands, "depth-study", parents=[common, training], help="error against depth"
    )
    depth.add_argument("--functions", type=_name_list)
    depth.add_argument("--l-max", dest="l_max", type=int)
    depth.add_argument("--width", type=int)
    depth.add_argument("--mode")

    k_study = _command(
        commands, "k-study", parents=[common, training, chain], help="error against Hilbert level"
    )
    k_study.add_argument("--function")
    k_study.add_argument("--width", type=int)
    k_study.add_argument("--levels", type=_int_list)
    k_study.add_argument("--layers", type=int)

    compare = _command(
        commands, "compare", parents=[common, training], help="deep against wide at equal budgets"
    )
    compare.add_argument("--function")
    compare.add_argument("--width", type=int)
    compare.add_argument("--l-max", dest="l_max", type=int)
    compare.add_argument("--mode")

    corpus = _command(commands, "corpus", help="test functions")
    _command(
        corpus.add_subparsers(dest="action", required=True),
        "list", parents=[common], help="list the test functions",
    )

    config = _command(commands, "config", help="configuration")
    _command(
        config.add_subparsers(dest="action", required=True),
        "show", parents=[common], help="print the resolved configuration",
    )
    return parser


class Runner:
    """Executes one parsed command against resolved settings."""

    def __init__(self, args, settings: Settings):
        self.logger = logging.getLogger(__name__)
        self.args = args
        self.settings = settings
        self.store = ModelStore()

    @property
    def fmt(self) -> str:
        """Output format."""
        return self.settings["format"]

    def output(self, text: str):
        """Send results to --out or stdout."""
        out = self.settings["out"]
        if out:
            write_text(out, text)
        else:
            sys.stdout.write(text)

    def save_model(self, model):
        """Save the model when --model-out is set."""
        if self.settings["model_out"]:
            self.store.save(model, self.settings["model_out"])

    def emit_record(self, record: dict):
        """Emit a single flat record as CSV or JSON."""
        if self.fmt == "structured":
            self.output(render_record(record))
            return
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter=",", lineterminator="\n")
        writer.writerow(record.keys())
        writer.writerow(
            format_float(v) if isinstance(v, float) else v for v in record.values()
        )
        self.output(buffer.getvalue())

    def emit_trace(self, trace, extra=None):
        """Emit an error trace, with an optional structured record next to it."""
        if self.fmt == "structured":
            document = {
                "per_layer": list(trace.per_layer),
                "cumulative": list(trace.cumulative),
                "initial_error": trace.initial_error,
            }
            if extra is not None:
                document.update(extra)
            self.output(render_record(document))
            return
        self.output(render_trace(trace))
        if extra is not None:
            out = self.settings["out"]
            if out:
                stem, _ = os.path.splitext(out)
                write_text(f"{stem}_bound.json", render_record(extra))
            else:
                sys.stdout.write("\n" + render_record(extra))

    def run(self) -> int:
        """Dispatch on the command."""
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        started = time.perf_counter()
        handler()
        self.logger.info(
            "%s finished in %s", self.args.command, elapsed(time.perf_counter() - started)
        )
        return 0

    def cmd_hilbert(self):
        """Encode, decode or snap on the Hilbert curve."""
        args = self.args
        if args.action == "encode":
            index = encode(CellCoord(args.dims, args.level, tuple(args.values)))
            self.output(f"{index.value}\n")
        elif args.action == "decode":
            if len(args.values) != 1:
                raise ConfigError("decode takes exactly one index")
            cell = decode(HilbertIndex(args.values[0], args.dims, args.level))
            self.output(" ".join(str(c) for c in cell.coords) + "\n")
        else:
            index, center = snap_point(args.values, args.level)
            self.output(" ".join([str(index.value)] + [format_float(c) for c in center]) + "\n")

    def cmd_fit_shallow(self):
        """Fit one shallow net."""
        f = get_function(self.settings["function"])
        grid = self.settings.grid(f.n)
        self.logger.info("Measuring on %s grid points", point_count(grid.size))
        net, err = fit_shallow(f, grid, int(self.settings["units"]), self.settings.fit_config())
        self.save_model(net)
        self.emit_record(
            {
                "function": f.name,
                "units": net.units,
                "parameter_count": net.parameter_count,
                "measured_error": err,
            }
        )

    def cmd_fit_cascade(self):
        """Train a residual cascade and emit its trace."""
        f = get_function(self.settings["function"])
        model, trace = train_cascade(
            f,
            self.settings.grid(f.n),
            int(self.settings["layers"]),
            int(self.settings["width"]),
            self.settings.mode(),
            self.settings.fit_config(),
        )
        self.save_model(model)
        self.emit_trace(trace)

    def cmd_fit_layernet(self):
        """Train a layer network; width below n goes through the Hilbert reduction."""
        s = self.settings
        f = get_function(s["function"])
        width = int(s["width"])
        options = {
            "tau": float(s["tau"]),
            "tol": float(s["tol"]),
            "mode": s.mode("layernet_mode"),
            "chain_activation": s.chain_activation(),
        }
        grid = s.grid(f.n)
        if width < f.n:
            model, trace, bound = train_layernet_lt(
                f, grid, int(s["layers"]), width, int(s["hilbert_level"]), s.fit_config(), **options
            )
            extra = {"bound_report": bound.as_record()}
        else:
            model, trace = train_layernet_ge(
                f, grid, int(s["layers"]), width, s.fit_config(), **options
            )
            extra = None
        self.save_model(model)
        self.emit_trace(trace, extra)

    def _emit_reports(self, reports):
        out = self.settings["out"]
        if out:
            emit_reports(reports, out, self.fmt)
        else:
            sys.stdout.write(render_reports(reports, self.fmt))

    def cmd_rate_study(self):
        """Error against width for every selected function."""
        s = self.settings
        reports = rate_study_shallow(
            [get_function(name) for name in s["functions"]],
            s["widths"],
            s.fit_config(),
            grid_points=s["grid_points"],
            record_runtime=bool(s["record_runtime"]),
            config_echo=s.as_dict(),
            max_points=int(s["max_grid_points"]),
        )
        self._emit_reports(reports)

    def cmd_depth_study(self):
        """Error against depth for every selected function."""
        s = self.settings
        reports = depth_study(
            [get_function(name) for name in s["functions"]],
            int(s["l_max"]),
            int(s["width"]),
            s.mode(),
            s.fit_config(),
            grid_points=s["grid_points"],
            record_runtime=bool(s["record_runtime"]),
            config_echo=s.as_dict(),
            max_points=int(s["max_grid_points"]),
        )
        self._emit_reports(reports)

    def cmd_k_study(self):
        """Error against Hilbert level."""
        s = self.settings
        report = hilbert_k_study(
            get_function(s["function"]),
            int(s["width"]),
            s["levels"],
            int(s["layers"]),
            s.fit_config(),
            grid_points=s["grid_points"],
            record_runtime=bool(s["record_runtime"]),
            config_echo=s.as_dict(),
            max_points=int(s["max_grid_points"]),
            tau=float(s["tau"]),
            tol=float(s["tol"]),
            mode=s.mode("layernet_mode"),
            chain_activation=s.chain_activation(),
        )
        self._emit_reports([report])

    def cmd_compare(self):
        """Deep against wide at equal parameter budgets."""
        s = self.settings
        deep, wide = compare_depth_width(
            get_function(s["function"]),
            int(s["width"]),
            int(s["l_max"]),
            s.mode(),
            s.fit_config(),
            grid_points=s["grid_points"],
            record_runtime=bool(s["record_runtime"]),
            config_echo=s.as_dict(),
            max_points=int(s["max_grid_points"]),
        )
        if self.fmt == "structured":
            self.output(render_reports([deep, wide], self.fmt))
        else:
            self.output(f"# depth\n{render_rows(deep)}\n# width\n{render_rows(wide)}")

    def cmd_corpus(self):
        """List the test functions."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter=",", lineterminator="\n")
        writer.writerow(["name", "n", "smoothness_m", "lipschitz_L", "description"])
        for f in CORPUS.values():
            writer.writerow(
                [
                    f.name,
                    f.n,
                    f.smoothness_m,
                    "" if f.lipschitz_L is None else format_float(f.lipschitz_L),
                    f.description,
                ]
            )
        self.output(buffer.getvalue())

    def cmd_config(self):
        """Print the resolved configuration."""
        out = self.settings["out"]
        if out:
            save_settings(self.settings.as_dict(), out)
        else:
            sys.stdout.write(json.dumps(self.settings.as_dict(), indent=2) + "\n")


def main(argv=None) -> int:
    """Run the command line interface; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_SETTINGS}
        settings = Settings(getattr(args, "config", None), overrides)
        verbose = getattr(args, "verbose", 0)
        level = {0: settings["log_level"], 1: "INFO"}.get(verbose, "DEBUG")
        init_logger(level)
        return Runner(args, settings).run()
    except ApproxError as err:
        message = " ".join(str(err).split())
        sys.stderr.write(f"error: {err.category}: {message}\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
