# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""The ``shapefit`` command line.

Subcommands: ``fit``, ``predict``, ``project``, ``rearrange``, ``synth``,
``eval-grid``, ``sweep`` and ``compare``. Task parameters come from flags,
then from a JSON ``--config`` file, then from defaults. Exit codes: 0 success,
1 unreadable or malformed input, 2 invalid configuration, 3 a fit that did not
converge (its model is written anyway).
"""

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from typing import Any, Optional, Sequence

from shapefit import dataset as data
from shapefit import fit_exceptions
from shapefit import metrics
from shapefit import model_io
from shapefit import synthetic
from shapefit.regression import comparison
from shapefit.regression import grids
from shapefit.regression import shapeops
from shapefit.regression import siamor


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3

EVAL_GRID = 20
"""Default resolution of ``eval-grid``."""


@dataclasses.dataclass
class RunConfig:
    """Task parameters of one command.

    Field names double as the keys of a ``--config`` JSON file.
    """

    degree: Optional[int] = None
    reference_degree: Optional[int] = None
    constraints: Optional[str] = None
    initial_grid: Optional[int] = None
    reference_grid: int = 20
    restarts: Optional[int] = None
    max_iterations: int = 500
    epsilon: Optional[tuple[float, ...]] = None
    workers: int = 1
    seed: int = 0
    scenario: Optional[str] = None
    size: Optional[int] = None
    noise: float = 0.0
    bump: float = 0.0
    grid: Optional[int] = None
    method: str = shapeops.AUTO
    ridge: float = 0.003
    degrees: Optional[str] = None
    sign: Optional[int] = None

    def __post_init__(self) -> None:
        if isinstance(self.epsilon, str):
            self.epsilon = parse_floats(self.epsilon)
        elif self.epsilon is not None:
            self.epsilon = tuple(float(value) for value in self.epsilon)
        for name in ("initial_grid", "reference_grid", "grid"):
            value = getattr(self, name)
            if value is not None and value < 2:
                raise ValueError(f"{name} must be at least 2, got {value}.")
        if self.degree is not None and self.degree < 1:
            raise ValueError(f"degree must be at least 1, got {self.degree}.")
        if self.reference_degree is not None and self.reference_degree < 1:
            raise ValueError(
                f"reference_degree must be at least 1, got {self.reference_degree}."
            )
        if self.sign not in (None, 1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}.")

    @classmethod
    def from_file(cls, path: data.PathLike) -> "RunConfig":
        """Load a configuration from a JSON object of field values."""
        with open(path, encoding="utf-8") as stream:
            try:
                values = json.load(stream)
            except json.JSONDecodeError as error:
                raise ValueError(f"{path}: config is not JSON: {error}") from None
        if not isinstance(values, dict):
            raise ValueError(f"{path}: config must be a JSON object.")
        known = {field.name for field in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"{path}: unknown config keys {', '.join(unknown)}.")
        try:
            return cls(**values)
        except TypeError as error:
            raise ValueError(f"{path}: {error}") from None

    def merged(self, overrides: dict[str, Any]) -> "RunConfig":
        """Return a copy with every non-`None` override applied."""
        changes = {name: value for name, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **changes)

    def fit_options(self) -> siamor.FitOptions:
        """Return the options of `siamor.fit`."""
        return siamor.FitOptions(
            initial_grid=self.initial_grid,
            reference_grid=self.reference_grid,
            restarts=self.restarts,
            max_iterations=self.max_iterations,
            epsilon=self.epsilon,
            workers=self.workers,
        )

    def require_degree(self) -> int:
        """Return the degree or fail if none was given."""
        if self.degree is None:
            raise ValueError("a polynomial degree is required (--degree).")
        return self.degree


def parse_floats(text: str) -> tuple[float, ...]:
    """Parse a comma-separated list of floats."""
    try:
        return tuple(float(token) for token in text.split(",") if token.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}.") from None


def parse_constraints(text: Optional[str]) -> siamor.ShapeConstraintSpec:
    """Parse the compact constraint syntax.

    Plain tokens form the monotonicity signature, one per direction in order
    (``+1``, ``-1`` or ``0``). A token ``cN`` makes direction N concave and
    ``vN`` makes it convex, N being 1-based.

    Examples
    --------
    >>> [e.label for e in parse_constraints("+1,-1,0,+1,c4").entries]
    ['increasing x1', 'decreasing x2', 'increasing x4', 'concave x4']
    """
    if text is None or not text.strip():
        return siamor.ShapeConstraintSpec()
    signature: list[int] = []
    concave: list[int] = []
    convex: list[int] = []
    for token in (token.strip() for token in text.split(",")):
        if token[:1] in ("c", "v"):
            try:
                direction = int(token[1:])
            except ValueError:
                raise fit_exceptions.InvalidConstraintError(
                    f"bad token {token!r}"
                ) from None
            if direction < 1:
                raise fit_exceptions.InvalidConstraintError(
                    f"directions are 1-based, got {token!r}"
                )
            (concave if token[0] == "c" else convex).append(direction - 1)
            continue
        try:
            signature.append(int(token))
        except ValueError:
            raise fit_exceptions.InvalidConstraintError(f"bad token {token!r}") from None
    return siamor.ShapeConstraintSpec.from_signature(
        signature, concave=concave, convex=convex
    )


def parse_degrees(text: str) -> list[int]:
    """Parse ``2,4,6`` or a range ``2-8``."""
    try:
        if "-" in text:
            first, last = (int(part) for part in text.split("-", 1))
            return list(range(first, last + 1))
        return [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise ValueError(f"expected degrees like 2-8 or 2,4,6, got {text!r}.") from None


def format_report(
    report: siamor.FitReport, registry: Optional[metrics.MetricRegistry] = None
) -> str:
    """Return the human-readable fit report."""
    lines = [
        f"status: {report.status.value}",
        report.describe(),
        f"rmse: {report.rmse:.6g}",
        "added points:",
    ]
    lines += [f"  {label}: {count}" for label, count in report.added_points.items()]
    lines.append("tolerances:")
    lines += [f"  {label}: {value:.6g}" for label, value in report.tolerances.items()]
    if registry is not None:
        lines.append("metrics:")
        for name, value in registry.summary().items():
            if isinstance(value, dict):
                value = ", ".join(
                    f"{key} {number:.4g}"
                    for key, number in value.items()
                    if not isinstance(number, dict)
                )
            lines.append(f"  {name}: {value}")
    return "\n".join(lines)


def cmd_fit(args: argparse.Namespace, config: RunConfig) -> int:
    """Fit a shape-constrained polynomial and write the model."""
    dataset = data.read_csv(args.data)
    spec = parse_constraints(config.constraints)
    registry = metrics.MetricRegistry()
    status = EXIT_OK
    try:
        model, report = siamor.fit(
            dataset, spec, config.require_degree(), config.fit_options(), registry
        )
    except fit_exceptions.MaxIterationsError as error:
        if error.model is None:
            raise
        model, report = error.model, error.report
        status = EXIT_NOT_CONVERGED
    model_io.save_model(args.out, model, spec, report)
    print(format_report(report, registry))
    return status


def cmd_predict(args: argparse.Namespace, config: RunConfig) -> int:
    """Predict at the points of a CSV file."""
    model = model_io.load_model(args.model).model
    points = data.read_points_csv(args.data, dim=model.dim)
    predictions = model.predict(points)
    header = data.input_header(model.dim) + ["prediction"]
    data.write_columns(
        args.out, header, [points[:, j] for j in range(model.dim)] + [predictions]
    )
    return EXIT_OK


def cmd_project(args: argparse.Namespace, config: RunConfig) -> int:
    """Project a model or grid onto the monotone functions on a grid."""
    grid, saved = _source_grid(args.model, config.grid)
    if config.constraints is not None:
        spec = parse_constraints(config.constraints)
    elif saved is not None:
        spec = siamor.ShapeConstraintSpec(saved.spec.monotone_entries)
    else:
        raise ValueError("a grid file needs --constraints.")
    projected = shapeops.monotonic_projection_grid(grid, spec, method=config.method)
    model_io.save_grid(args.out, projected)
    logger.info("projection slack %.3g", shapeops.monotonicity_slack(projected, spec))
    _print_grid_rmse(projected, args.data)
    return EXIT_OK


def cmd_rearrange(args: argparse.Namespace, config: RunConfig) -> int:
    """Rearrange a 1D model or grid into a monotone one."""
    grid, saved = _source_grid(args.model, config.grid)
    if grid.dim != 1:
        raise fit_exceptions.DimensionMismatchError(1, grid.dim)
    sign = config.sign
    if sign is None:
        entries = saved.spec.monotone_entries if saved is not None else ()
        sign = entries[0].sign if entries else 1
    rearranged = shapeops.rearrangement_1d(grid, sign)
    model_io.save_grid(args.out, rearranged)
    _print_grid_rmse(rearranged, args.data)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    """Generate a synthetic data set."""
    if config.scenario is None:
        raise ValueError("a scenario is required (--scenario).")
    dataset = synthetic.generate(
        config.scenario,
        seed=config.seed,
        size=config.size,
        noise=config.noise,
        bump=config.bump,
    )
    data.write_csv(dataset, args.out)
    return EXIT_OK


def cmd_eval_grid(args: argparse.Namespace, config: RunConfig) -> int:
    """Tabulate a model and its constrained derivatives on a grid."""
    saved = model_io.load_model(args.model)
    model = saved.model
    axes = _model_axes(model, config.grid or EVAL_GRID)
    points = grids.tensor_points(axes)
    header = data.input_header(model.dim) + ["prediction"]
    columns = [points[:, j] for j in range(model.dim)] + [model.predict(points)]
    for entry in saved.spec.entries:
        header.append(f"d{entry.order}_x{entry.direction + 1}")
        columns.append(model.derivative(points, entry.direction, entry.order))
    data.write_columns(args.out, header, columns)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """Fit a range of degrees and tabulate the outcomes."""
    if config.degrees is None:
        raise ValueError("degrees are required (--degrees).")
    dataset = data.read_csv(args.data)
    spec = parse_constraints(config.constraints)
    rows = siamor.degree_sweep(
        dataset, spec, parse_degrees(config.degrees), config.fit_options()
    )
    print(f"{'degree':>6} {'status':>14} {'iterations':>10} {'constraints':>11} rmse")
    for row in rows:
        print(
            f"{row.degree:>6} {row.report.status.value:>14} "
            f"{row.report.iterations:>10} {row.report.total_constraints:>11} "
            f"{row.report.rmse:.6g}"
        )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, config: RunConfig) -> int:
    """Compare the training RMSE of the reference models and monotonizers."""
    dataset = data.read_csv(args.data)
    spec = parse_constraints(config.constraints)
    result = comparison.compare_methods(
        dataset,
        spec,
        config.require_degree(),
        reference_degree=config.reference_degree,
        ridge=config.ridge,
        resolution=config.grid,
        method=config.method,
        options=config.fit_options(),
    )
    for name, value in result.rmse.items():
        if name == comparison.CONSTRAINED and not result.converged:
            name += " (not converged)"
        print(f"{name:<34} {value:.6g}")
    return EXIT_OK


def _rmse(predictions: np.ndarray, dataset: data.Dataset) -> float:
    return data.rmse(predictions, dataset.targets)


def _model_axes(model: siamor.PolynomialModel, resolution: int) -> grids.Axes:
    # The box of the input scaling. A direction with zero range in the
    # training data has scale 1, so its axis spans [a, a + 1].
    lower = model.input_scaling.offset
    return comparison.box_axes(lower, lower + model.input_scaling.scale, resolution)


def _source_grid(
    path: data.PathLike, resolution: Optional[int]
) -> tuple[shapeops.GridFunction, Optional[model_io.ModelFile]]:
    if model_io.document_format(path) == model_io.GRID_FORMAT:
        return model_io.load_grid(path), None
    saved = model_io.load_model(path)
    model = saved.model
    if resolution is None:
        resolution = comparison.default_resolution(model.dim)
    grid = shapeops.GridFunction.from_function(
        _model_axes(model, resolution), model.predict
    )
    return grid, saved


def _print_grid_rmse(grid: shapeops.GridFunction, path: Optional[str]) -> None:
    if path is None:
        return
    dataset = data.read_csv(path)
    predictions = shapeops.eval_grid_constant_many(grid, dataset.inputs)
    print(f"rmse: {_rmse(predictions, dataset):.6g}")


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser of all subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    common.add_argument("--config", help="JSON file of task parameters")

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--degree", type=int, help="total polynomial degree")
    fitting.add_argument(
        "--constraints", help="signature like +1,-1,0,+1 plus cN/vN tokens"
    )
    fitting.add_argument(
        "--init-grid", dest="initial_grid", type=int, help="initial grid points"
    )
    fitting.add_argument(
        "--ref-grid", dest="reference_grid", type=int, help="reference grid points"
    )
    fitting.add_argument("--restarts", type=int, help="multistart points")
    fitting.add_argument(
        "--max-iter", dest="max_iterations", type=int, help="outer iteration cap"
    )
    fitting.add_argument("--epsilon", help="raw-unit tolerances, one per entry")
    fitting.add_argument("--workers", type=int, help="lower-level search threads")

    parser = argparse.ArgumentParser(
        prog="shapefit", description="Shape-constrained polynomial regression."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", parents=[common, fitting], help=cmd_fit.__doc__)
    fit.add_argument("--data", required=True, help="training data CSV")
    fit.add_argument("--out", "--model", dest="out", required=True, help="model file")
    fit.set_defaults(handler=cmd_fit)

    predict = commands.add_parser("predict", parents=[common], help=cmd_predict.__doc__)
    predict.add_argument("--model", required=True, help="model file")
    predict.add_argument("--data", required=True, help="points CSV")
    predict.add_argument("--out", required=True, help="predictions CSV")
    predict.set_defaults(handler=cmd_predict)

    for name, handler in (("project", cmd_project), ("rearrange", cmd_rearrange)):
        command = commands.add_parser(name, parents=[common], help=handler.__doc__)
        command.add_argument("--model", required=True, help="model or grid file")
        command.add_argument("--out", required=True, help="grid file")
        command.add_argument("--grid", type=int, help="grid points per dimension")
        command.add_argument("--data", help="data CSV to report the RMSE on")
        if name == "project":
            command.add_argument("--constraints", help="signature like +1,0,-1")
            command.add_argument("--method", choices=shapeops.METHODS)
        else:
            command.add_argument("--sign", type=int, choices=(1, -1))
        command.set_defaults(handler=handler)

    synth = commands.add_parser("synth", parents=[common], help=cmd_synth.__doc__)
    synth.add_argument("--scenario", choices=sorted(synthetic.SCENARIOS))
    synth.add_argument("--seed", type=int, help="random seed")
    synth.add_argument("--size", type=int, help="number of points")
    synth.add_argument("--noise", type=float, help="noise level, fraction of range")
    synth.add_argument("--bump", type=float, help="dip depth, fraction of range")
    synth.add_argument("--out", required=True, help="data CSV")
    synth.set_defaults(handler=cmd_synth)

    evaluate = commands.add_parser(
        "eval-grid", parents=[common], help=cmd_eval_grid.__doc__
    )
    evaluate.add_argument("--model", required=True, help="model file")
    evaluate.add_argument("--grid", type=int, help="grid points per dimension")
    evaluate.add_argument("--out", required=True, help="grid CSV")
    evaluate.set_defaults(handler=cmd_eval_grid)

    sweep = commands.add_parser("sweep", parents=[common, fitting], help=cmd_sweep.__doc__)
    sweep.add_argument("--data", required=True, help="training data CSV")
    sweep.add_argument("--degrees", help="degrees like 2-8 or 2,4,6")
    sweep.set_defaults(handler=cmd_sweep)

    compare = commands.add_parser(
        "compare", parents=[common, fitting], help=cmd_compare.__doc__
    )
    compare.add_argument("--data", required=True, help="training data CSV")
    compare.add_argument("--grid", type=int, help="projection grid points")
    compare.add_argument("--method", choices=shapeops.METHODS)
    compare.add_argument("--ridge", type=float, help="ridge penalty, scaled data")
    compare.add_argument(
        "--reference-degree",
        type=int,
        help="degree of the polynomial and ridge references (default: --degree)",
    )
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig()
        overrides = {
            field.name: getattr(args, field.name, None)
            for field in dataclasses.fields(RunConfig)
        }
        config = config.merged(overrides)
        return args.handler(args, config)
    except (fit_exceptions.DatasetError, fit_exceptions.ModelFormatError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except fit_exceptions.MaxIterationsError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except fit_exceptions.ShapeFitError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INPUT
