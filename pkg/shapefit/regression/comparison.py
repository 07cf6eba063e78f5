# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Training errors of the shape-constrained fit and its competitors.

The unconstrained references are fitted to the data, sampled on a grid over
the data box, monotonized by projection or, in one dimension, rearrangement,
and read back at the training inputs as grid-constant functions.
"""

import dataclasses
import logging

import numpy as np

from typing import Optional

from shapefit import dataset as data
from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import grids
from shapefit.regression import refmodels
from shapefit.regression import shapeops
from shapefit.regression import siamor


logger = logging.getLogger(__name__)

PROJECTION_GRID_1D = 80
"""Default projection grid points for one-dimensional inputs."""

PROJECTION_GRID = 40
"""Default projection grid points per dimension otherwise."""

CONSTRAINED = "shape-constrained"

MONOTONIZED = (
    "projected polynomial",
    "projected gpr",
    "rearranged polynomial",
    "rearranged gpr",
)
"""Row names of the monotonized references, where they apply."""


@dataclasses.dataclass(frozen=True)
class Comparison:
    """Training RMSE of every method, in raw target units.

    Attributes
    ----------
    rmse: `dict[str, float]`
        RMSE by method name, in reporting order.
    converged: `bool`
        Whether the shape-constrained fit met its tolerances.
    """

    rmse: dict[str, float]
    converged: bool

    @property
    def constrained(self) -> float:
        """float: The RMSE of the shape-constrained fit."""
        return self.rmse[CONSTRAINED]

    @property
    def monotonized(self) -> dict[str, float]:
        """dict[str, float]: The RMSE of each monotonized reference present."""
        return {name: self.rmse[name] for name in MONOTONIZED if name in self.rmse}

    def beats(self, name: str) -> bool:
        """Whether the shape-constrained fit is at least as accurate as `name`."""
        return self.constrained <= self.rmse[name]


def box_axes(lower: np.ndarray, upper: np.ndarray, resolution: int) -> grids.Axes:
    """Return equidistant axes over a box; a zero-width direction gets one value."""
    return tuple(
        np.linspace(low, high, resolution) if high > low else np.array([low])
        for low, high in zip(lower, upper)
    )


def default_resolution(dim: int) -> int:
    """Return the default projection grid points per dimension."""
    return PROJECTION_GRID_1D if dim == 1 else PROJECTION_GRID


def compare_methods(
    dataset: data.Dataset,
    spec: siamor.ShapeConstraintSpec,
    degree: int,
    reference_degree: Optional[int] = None,
    ridge: float = 0.003,
    resolution: Optional[int] = None,
    method: str = shapeops.AUTO,
    options: Optional[siamor.FitOptions] = None,
    registry: Optional[metrics.MetricRegistry] = None,
) -> Comparison:
    """Fit every method to `dataset` and collect the training errors.

    Parameters
    ----------
    dataset: `Dataset`
        The training data.
    spec: `ShapeConstraintSpec`
        The constraints; the references are monotonized by its monotone part.
    degree: `int`
        Degree of the shape-constrained polynomial.
    reference_degree: `Optional[int]`
        Degree of the least-squares and ridge references; `degree` if omitted.
    ridge: `float`
        Ridge penalty on scaled data.
    resolution: `Optional[int]`
        Projection grid points per dimension; 80 in 1D, otherwise 40.
    method: `str`
        Projection method, see `shapeops.monotonic_projection_grid`.
    options: `Optional[FitOptions]`
        Options of the shape-constrained fit.

    Returns
    -------
    `Comparison`
        A shape-constrained fit stopped by an iteration cap is reported with
        its last iterate and ``converged`` false.
    """
    spec.validate_dim(dataset.dim)
    reference_degree = reference_degree if reference_degree is not None else degree
    monotone = siamor.ShapeConstraintSpec(spec.monotone_entries)
    axes = box_axes(
        dataset.lower, dataset.upper, resolution or default_resolution(dataset.dim)
    )

    polynomial = refmodels.fit_unconstrained_poly(dataset, reference_degree)
    ridged = refmodels.fit_ridge_poly(dataset, reference_degree, ridge)
    gpr = refmodels.gpr_fit(dataset, registry=registry)
    rmse = {
        "polynomial": _rmse(polynomial.predict(dataset.inputs), dataset),
        "ridge": _rmse(ridged.predict(dataset.inputs), dataset),
        "gpr": _rmse(gpr.predict(dataset.inputs), dataset),
    }
    references = (("polynomial", polynomial), ("gpr", gpr))
    sampled = {
        name: shapeops.GridFunction.from_function(axes, predictor.predict)
        for name, predictor in references
    }
    if monotone.entries:
        for name, grid in sampled.items():
            projected = shapeops.monotonic_projection_grid(
                grid, monotone, method=method, registry=registry
            )
            rmse[f"projected {name}"] = _grid_rmse(projected, dataset)
    if dataset.dim == 1 and len(monotone.entries) == 1:
        sign = monotone.entries[0].sign
        for name, grid in sampled.items():
            rearranged = shapeops.rearrangement_1d(grid, sign)
            rmse[f"rearranged {name}"] = _grid_rmse(rearranged, dataset)

    converged = True
    try:
        _, report = siamor.fit(dataset, spec, degree, options, registry=registry)
    except fit_exceptions.MaxIterationsError as error:
        if error.report is None:
            raise
        logger.warning("Comparing the last iterate of an unconverged fit.")
        report = error.report
        converged = False
    rmse[CONSTRAINED] = report.rmse
    return Comparison(rmse=rmse, converged=converged)


def _rmse(predictions: np.ndarray, dataset: data.Dataset) -> float:
    return data.rmse(predictions, dataset.targets)


def _grid_rmse(grid: shapeops.GridFunction, dataset: data.Dataset) -> float:
    return _rmse(shapeops.eval_grid_constant_many(grid, dataset.inputs), dataset)
