"""Rate studies over width, depth and Hilbert level."""

from dataclasses import asdict, dataclass, field
from enum import Enum
import logging
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cascade import FeatureMode, train_cascade
from .core_math import (
    DEFAULT_MAX_POINTS,
    Grid,
    TargetFunction,
    default_points_per_dim,
    make_grid,
)
from .errors import ApproxError, ConfigError
from .helpers import EXACT_FIT, elapsed, row_seed
from .layernet import train_layernet_lt
from .shallow import FitConfig, fit_shallow

logger = logging.getLogger(__name__)

MIN_SLOPE_ROWS = 3


class RateAxis(Enum):
    """Quantity a study varies."""

    WIDTH = "width_N"
    DEPTH = "depth_l"
    HILBERT_K = "hilbert_k"


@dataclass(frozen=True)
class RateRow:
    """One measurement of a study."""

    axis_value: int
    measured_error: float
    runtime_ms: float
    seed: int
    projection_term: Optional[float] = None
    parameter_count: Optional[int] = None


@dataclass(frozen=True)
class StudyFailure:
    """A row that raised instead of producing a measurement."""

    axis_value: int
    seed: int
    category: str
    message: str


@dataclass
class RateReport:
    """Measured errors along one axis for one function."""

    function_name: str
    n: int
    declared_m: int
    axis: RateAxis
    rows: List[RateRow] = field(default_factory=list)
    fitted_slope: Optional[float] = None
    config_echo: Dict = field(default_factory=dict)
    failures: List[StudyFailure] = field(default_factory=list)
    reference_slope: Optional[float] = None

    def finish(self):
        """Sort rows and fit the slope."""
        self.rows.sort(key=lambda row: row.axis_value)
        self.fitted_slope = fit_slope(self.rows, self.axis)
        return self


def fit_slope(rows: Sequence[RateRow], axis: RateAxis) -> Optional[float]:
    """Least-squares slope of log(error) against log(axis value), or the axis value itself.

    The width axis is fitted log-log (algebraic rates); depth and Hilbert
    level are fitted log-linear (exponential rates). Rows at or below the
    exact-fit threshold are left out; fewer than three usable rows give None.
    """
    usable = [r for r in rows if r.measured_error > EXACT_FIT]
    if len(usable) < MIN_SLOPE_ROWS:
        return None
    x = np.array([r.axis_value for r in usable], dtype=np.float64)
    if axis is RateAxis.WIDTH:
        x = np.log(x)
    y = np.log(np.array([r.measured_error for r in usable]))
    return float(np.polyfit(x, y, 1)[0])


def _check_increasing(values, what: str):
    if not values:
        raise ConfigError(f"{what} list is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{what} must be strictly increasing, got {list(values)}")


def _study_grid(f: TargetFunction, grid_points, max_points) -> Grid:
    return make_grid(f.n, grid_points or default_points_per_dim(f.n), max_points)


def _echo(cfg: FitConfig, config_echo, **study) -> Dict:
    echo = dict(config_echo) if config_echo else asdict(cfg)
    echo.update(study)
    return echo


class _Clock:
    """Measures a row; runtimes are reported only when asked for."""

    def __init__(self, record: bool):
        self.record = record
        self.start = time.perf_counter()

    def stop(self) -> float:
        """Elapsed milliseconds, or 0 when runtimes are not recorded."""
        seconds = time.perf_counter() - self.start
        logger.debug("Row took %s", elapsed(seconds))
        return seconds * 1000.0 if self.record else 0.0


def rate_study_shallow(
    functions: Sequence[TargetFunction],
    widths: Sequence[int],
    cfg: FitConfig,
    grid_points: Optional[int] = None,
    record_runtime: bool = False,
    config_echo: Optional[Dict] = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> List[RateReport]:
    """Shallow-net error against width N, one report per function.

    Each width is warm-started from the previous successful fit padded with
    inert units, so errors are non-increasing along the study.
    """
    _check_increasing(list(widths), "widths")
    reports = []
    for f in functions:
        grid = _study_grid(f, grid_points, max_points)
        report = RateReport(
            function_name=f.name,
            n=f.n,
            declared_m=f.smoothness_m,
            axis=RateAxis.WIDTH,
            config_echo=_echo(cfg, config_echo, widths=list(widths), function=f.name),
            reference_slope=-f.smoothness_m / f.n,
        )
        warm = None
        started = time.perf_counter()
        for index, units in enumerate(widths):
            seed = row_seed(cfg.rng_seed, index)
            clock = _Clock(record_runtime)
            try:
                net, err = fit_shallow(f, grid, units, cfg.with_seed(seed), warm_start=warm)
            except ApproxError as exc:
                logger.warning("%s at N=%d failed: %s", f.name, units, exc)
                report.failures.append(StudyFailure(units, seed, exc.category, str(exc)))
                continue
            warm = net
            report.rows.append(
                RateRow(units, err, clock.stop(), seed, parameter_count=net.parameter_count)
            )
        logger.info(
            "Width study of %s finished in %s", f.name, elapsed(time.perf_counter() - started)
        )
        reports.append(report.finish())
    return reports


def depth_study(
    functions: Sequence[TargetFunction],
    l_max: int,
    width: int,
    mode: FeatureMode,
    cfg: FitConfig,
    grid_points: Optional[int] = None,
    record_runtime: bool = False,
    config_echo: Optional[Dict] = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> List[RateReport]:
    """Cascade error against depth, read from the prefixes of one deep run per function.

    A run that stops early on an exact fit yields rows only up to its depth.
    All rows of a function share the runtime of its single run.
    """
    if l_max < 2:
        raise ConfigError(f"a depth study needs l_max >= 2, got {l_max}")
    reports = []
    for f in functions:
        grid = _study_grid(f, grid_points, max_points)
        report = RateReport(
            function_name=f.name,
            n=f.n,
            declared_m=f.smoothness_m,
            axis=RateAxis.DEPTH,
            config_echo=_echo(
                cfg, config_echo, l_max=l_max, width=width, mode=mode.value, function=f.name
            ),
        )
        clock = _Clock(record_runtime)
        try:
            model, trace = train_cascade(f, grid, l_max, width, mode, cfg)
        except ApproxError as exc:
            logger.warning("Depth study of %s failed: %s", f.name, exc)
            report.failures.append(StudyFailure(l_max, cfg.rng_seed, exc.category, str(exc)))
            reports.append(report.finish())
            continue
        runtime = clock.stop()
        for depth, cumulative in enumerate(trace.cumulative, start=1):
            report.rows.append(
                RateRow(
                    depth,
                    cumulative,
                    runtime,
                    cfg.rng_seed,
                    parameter_count=model.prefix(depth).parameter_count,
                )
            )
        reports.append(report.finish())
    return reports


def hilbert_k_study(
    f: TargetFunction,
    width: int,
    levels: Sequence[int],
    layers: int,
    cfg: FitConfig,
    grid_points: Optional[int] = None,
    record_runtime: bool = False,
    config_echo: Optional[Dict] = None,
    max_points: int = DEFAULT_MAX_POINTS,
    **layer_options,
) -> RateReport:
    """Total error of width-deficient networks against the Hilbert level k.

    Rows carry the scaled projection term next to the measured total.
    """
    if f.n < 2:
        raise ConfigError(f"a Hilbert level study needs n >= 2, {f.name} has n = {f.n}")
    _check_increasing(list(levels), "levels")
    grid = _study_grid(f, grid_points, max_points)
    report = RateReport(
        function_name=f.name,
        n=f.n,
        declared_m=f.smoothness_m,
        axis=RateAxis.HILBERT_K,
        config_echo=_echo(
            cfg, config_echo, width=width, levels=list(levels), layers=layers, function=f.name
        ),
    )
    for index, level in enumerate(levels):
        seed = row_seed(cfg.rng_seed, index)
        clock = _Clock(record_runtime)
        try:
            model, _, bound = train_layernet_lt(
                f, grid, layers, width, level, cfg.with_seed(seed), **layer_options
            )
        except ApproxError as exc:
            logger.warning("%s at k=%d failed: %s", f.name, level, exc)
            report.failures.append(StudyFailure(level, seed, exc.category, str(exc)))
            continue
        report.rows.append(
            RateRow(
                level,
                bound.total_measured,
                clock.stop(),
                seed,
                projection_term=bound.projection_term_scaled,
                parameter_count=model.parameter_count,
            )
        )
    return report.finish()


def compare_depth_width(
    f: TargetFunction,
    width: int,
    l_max: int,
    mode: FeatureMode,
    cfg: FitConfig,
    grid_points: Optional[int] = None,
    record_runtime: bool = False,
    config_echo: Optional[Dict] = None,
    max_points: int = DEFAULT_MAX_POINTS,
):
    """Cascades of depth 1..l_max against shallow nets with as many units in total.

    Returns (depth_report, width_report); rows carry parameter counts so the
    two can be compared at equal budgets.
    """
    (deep,) = depth_study(
        [f], l_max, width, mode, cfg, grid_points, record_runtime, config_echo, max_points
    )
    widths = [width * depth for depth in range(1, l_max + 1)]
    (wide,) = rate_study_shallow(
        [f], widths, cfg, grid_points, record_runtime, config_echo, max_points
    )
    return deep, wide
