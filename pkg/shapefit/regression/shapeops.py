# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Monotonization of functions sampled on rectangular grids.

The monotonic projection of grid values y0 is the solution of::

    minimize    sum_x (z(x) - y0(x))^2
    subject to  sign_j * (z(x + h_j e_j) - z(x)) >= 0

over all adjacent grid pairs of every constrained direction j. With one
constrained direction the program splits into independent 1D isotonic
regressions along the grid lines. Several directions are handled exactly by
the `qp` module on small grids and by Dykstra's cyclic projection over the
per-direction cones on large ones.
"""

import dataclasses
import logging

import numpy as np
import scipy.optimize

from typing import Callable, Optional, Sequence

from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import grids
from shapefit.regression import qp
from shapefit.regression import siamor


logger = logging.getLogger(__name__)

AUTO = "auto"
EXACT = "exact"
DYKSTRA = "dykstra"
METHODS = (AUTO, EXACT, DYKSTRA)

EXACT_GRID_LIMIT = 400
"""Largest grid that `AUTO` projects with the exact QP solver."""

LINE_FORMULA_LIMIT = 128
"""Longest grid line regressed with the vectorized min-max formula."""

LINE_BATCH_ENTRIES = 1 << 22
"""Bound on the temporary (lines, L, L) array of the min-max formula."""

SWEEP_TOLERANCE = 1e-11
"""Relative change and violation at which Dykstra sweeps stop."""

MAX_SWEEPS = 10000
"""Cap on Dykstra sweeps."""

BOUNDARY_TOLERANCE = 1e-12
"""Relative distance beyond the grid bounds that is still clamped."""


@dataclasses.dataclass(frozen=True)
class GridFunction:
    """Values of a function on a rectangular tensor grid.

    Attributes
    ----------
    coordinates: `tuple[numpy.ndarray, ...]`
        The strictly increasing coordinates of each dimension.
    values: `numpy.ndarray`
        The value tensor, C-ordered with one axis per dimension.
    """

    coordinates: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        coordinates = tuple(
            np.atleast_1d(np.array(axis, dtype=float)) for axis in self.coordinates
        )
        if not coordinates:
            raise ValueError("a grid needs at least one dimension.")
        for j, axis in enumerate(coordinates):
            if axis.ndim != 1 or axis.shape[0] == 0:
                raise ValueError(f"coordinates of x{j + 1} must be a nonempty vector.")
            if np.any(np.diff(axis) <= 0.0):
                raise ValueError(f"coordinates of x{j + 1} are not strictly increasing.")
            axis.setflags(write=False)
        values = np.array(self.values, dtype=float)
        shape = grids.shape_of(coordinates)
        if values.shape != shape:
            if values.size != int(np.prod(shape)):
                raise ValueError(
                    f"{values.size} values do not fill a grid of shape {shape}."
                )
            values = values.reshape(shape)
        values.setflags(write=False)
        object.__setattr__(self, "coordinates", coordinates)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        coordinates: grids.Axes,
        function: Callable[[np.ndarray], np.ndarray],
        chunk_size: int = grids.DEFAULT_CHUNK,
    ) -> "GridFunction":
        """Sample a vectorized function on the grid, chunk by chunk."""
        values = np.concatenate(
            [
                np.asarray(function(chunk), dtype=float).ravel()
                for chunk in grids.iter_chunks(coordinates, chunk_size)
            ]
        )
        return cls(coordinates=tuple(coordinates), values=values)

    @property
    def dim(self) -> int:
        """int: The number of dimensions."""
        return len(self.coordinates)

    @property
    def shape(self) -> tuple[int, ...]:
        """tuple[int, ...]: The shape of the value tensor."""
        return self.values.shape

    @property
    def step_sizes(self) -> tuple[np.ndarray, ...]:
        """tuple[numpy.ndarray, ...]: The spacings h_j of every dimension."""
        return tuple(np.diff(axis) for axis in self.coordinates)

    @property
    def lower(self) -> np.ndarray:
        """numpy.ndarray: The lower corner of the grid."""
        return np.array([axis[0] for axis in self.coordinates])

    @property
    def upper(self) -> np.ndarray:
        """numpy.ndarray: The upper corner of the grid."""
        return np.array([axis[-1] for axis in self.coordinates])

    def points(self) -> np.ndarray:
        """Return all grid points in the order of the flattened values."""
        return grids.tensor_points(self.coordinates)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        """Return a grid function on the same grid with other values."""
        return GridFunction(coordinates=self.coordinates, values=values)


def pava_1d(values: Sequence[float], sign: int = 1) -> np.ndarray:
    """Return the isotonic regression of a sequence with equal weights.

    Parameters
    ----------
    values: `Sequence[float]`
        A nonempty sequence.
    sign: `int`
        +1 for a nondecreasing fit, -1 for a nonincreasing one.

    Returns
    -------
    `numpy.ndarray`
        The closest monotone sequence in the Euclidean norm.

    Examples
    --------
    >>> pava_1d([3.0, 1.0, 2.0])
    array([2., 2., 2.])
    """
    y = sign * np.asarray(values, dtype=float).ravel()
    if y.shape[0] == 0:
        raise ValueError("at least one value is required.")
    means: list[float] = []
    sizes: list[int] = []
    for value in y:
        means.append(float(value))
        sizes.append(1)
        # Pool adjacent violators until the block means increase.
        while len(means) > 1 and means[-2] > means[-1]:
            size = sizes[-2] + sizes[-1]
            mean = (means[-2] * sizes[-2] + means[-1] * sizes[-1]) / size
            means[-2:] = [mean]
            sizes[-2:] = [size]
    return sign * np.repeat(means, sizes)


def isotonic_lines(lines: np.ndarray, sign: int = 1) -> np.ndarray:
    """Regress every row of a matrix onto the monotone sequences.

    Short rows use the closed form z_i = max_{j<=i} min_{k>=i} mean(y_j..y_k)
    for a whole batch of rows at once; long rows go through
    `scipy.optimize.isotonic_regression` one at a time.
    """
    lines = sign * np.asarray(lines, dtype=float)
    count, length = lines.shape
    if length <= 1 or count == 0:
        return sign * lines
    if length > LINE_FORMULA_LIMIT:
        result = np.array(
            [scipy.optimize.isotonic_regression(line).x for line in lines]
        )
        return sign * result

    result = np.empty_like(lines)
    batch = max(1, LINE_BATCH_ENTRIES // (length * length))
    lengths = np.arange(length)
    span = lengths[np.newaxis, :] - lengths[:, np.newaxis] + 1
    valid = span > 0
    upper = lengths[:, np.newaxis] <= lengths[np.newaxis, :]
    for start in range(0, count, batch):
        block = lines[start : start + batch]
        sums = np.concatenate(
            [np.zeros((block.shape[0], 1)), np.cumsum(block, axis=1)], axis=1
        )
        # means[l, j, k] = mean of block[l, j..k] for j <= k.
        with np.errstate(divide="ignore", invalid="ignore"):
            means = (sums[:, np.newaxis, 1:] - sums[:, :-1, np.newaxis]) / span
        means = np.where(valid, means, np.inf)
        # tail[l, j, i] = min over k >= i of means[l, j, k].
        tail = np.minimum.accumulate(means[:, :, ::-1], axis=2)[:, :, ::-1]
        tail = np.where(upper, tail, -np.inf)
        result[start : start + batch] = tail.max(axis=1)
    return sign * result


def isotonic_along_axis(values: np.ndarray, axis: int, sign: int = 1) -> np.ndarray:
    """Project a tensor onto the cone monotone along one axis.

    Only grid lines that violate the order are regressed.
    """
    moved = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    lines = moved.reshape(-1, moved.shape[-1]).copy()
    if lines.shape[1] > 1:
        violating = np.any(sign * np.diff(lines, axis=1) < 0.0, axis=1)
        if np.any(violating):
            lines[violating] = isotonic_lines(lines[violating], sign)
    return np.moveaxis(lines.reshape(moved.shape), -1, axis)


def monotonic_projection_grid(
    f0: GridFunction,
    spec: siamor.ShapeConstraintSpec,
    method: str = AUTO,
    registry: Optional[metrics.MetricRegistry] = None,
    max_sweeps: int = MAX_SWEEPS,
) -> GridFunction:
    """Return the discrete monotonic projection of grid values.

    Parameters
    ----------
    f0: `GridFunction`
        The values to project.
    spec: `ShapeConstraintSpec`
        Order-1 entries only, at least one.
    method: `str`
        ``auto``, ``exact`` or ``dykstra``. ``auto`` solves grids of up to
        `EXACT_GRID_LIMIT` points exactly and uses Dykstra beyond.
    registry: `Optional[metrics.MetricRegistry]`
        Receives ``shapeops.sweeps``.
    max_sweeps: `int`
        The cap on Dykstra sweeps.

    Returns
    -------
    `GridFunction`
        The projected values on the same grid.

    Raises
    ------
    `InvalidConstraintError`
        If `spec` is empty or holds order-2 entries.
    `MaxIterationsError`
        If Dykstra's method has not converged after `max_sweeps` sweeps.
    """
    if method not in METHODS:
        raise ValueError(f"unknown projection method {method!r}.")
    if max_sweeps < 1:
        raise ValueError(f"max_sweeps must be positive, got {max_sweeps}.")
    entries = _monotone_entries(spec, f0.dim)

    if len(entries) == 1 and method != DYKSTRA:
        entry = entries[0]
        return f0.with_values(
            isotonic_along_axis(f0.values, entry.direction, entry.sign)
        )
    if method == EXACT or (method == AUTO and f0.values.size <= EXACT_GRID_LIMIT):
        return f0.with_values(_exact_projection(f0.values, entries))
    return f0.with_values(
        _dykstra_projection(f0.values, entries, registry, max_sweeps)
    )


def monotonicity_slack(g: GridFunction, spec: siamor.ShapeConstraintSpec) -> float:
    """Return the smallest sign_j * (z(x + h_j e_j) - z(x)) over the grid.

    A nonnegative result means every adjacent-pair constraint holds.
    """
    slack = np.inf
    for entry in _monotone_entries(spec, g.dim):
        if g.shape[entry.direction] > 1:
            differences = np.diff(g.values, axis=entry.direction)
            slack = min(slack, float((entry.sign * differences).min()))
    return slack


def rearrangement_1d(f0: GridFunction, sign: int = 1) -> GridFunction:
    """Sort the values of a 1D grid function, ascending for sign +1.

    Raises
    ------
    `DimensionMismatchError`
        If the grid is not one-dimensional.
    """
    if f0.dim != 1:
        raise fit_exceptions.DimensionMismatchError(1, f0.dim)
    if sign not in (1, -1):
        raise fit_exceptions.InvalidConstraintError(f"sign must be +1 or -1, got {sign}")
    ordered = np.sort(f0.values, kind="stable")
    return f0.with_values(ordered if sign > 0 else ordered[::-1])


def eval_grid_constant(g: GridFunction, x: Sequence[float]) -> float:
    """Evaluate the grid-constant extension at one point.

    The value of a point is the value of the grid point with the largest
    coordinates not above it, so exact grid points return their own value.

    Raises
    ------
    `ValueError`
        If `x` lies outside the grid's bounding box.
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (g.dim,):
        raise fit_exceptions.DimensionMismatchError(g.dim, point.shape[-1])
    return float(eval_grid_constant_many(g, point[np.newaxis, :])[0])


def eval_grid_constant_many(g: GridFunction, points: np.ndarray) -> np.ndarray:
    """Evaluate the grid-constant extension at an (n, d) array of points."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1 and g.dim == 1:
        points = points[:, np.newaxis]
    if points.ndim != 2 or points.shape[1] != g.dim:
        raise fit_exceptions.DimensionMismatchError(g.dim, points.shape[-1])
    indices = []
    for j, axis in enumerate(g.coordinates):
        column = points[:, j]
        slack = BOUNDARY_TOLERANCE * np.maximum(1.0, np.abs(axis[[0, -1]]))
        if np.any(column < axis[0] - slack[0]) or np.any(column > axis[-1] + slack[1]):
            raise ValueError(
                f"points outside [{axis[0]}, {axis[-1]}] in direction x{j + 1}."
            )
        cell = np.searchsorted(axis, np.clip(column, axis[0], axis[-1]), side="right")
        indices.append(np.clip(cell - 1, 0, axis.shape[0] - 1))
    return g.values[tuple(indices)]


def _monotone_entries(
    spec: siamor.ShapeConstraintSpec, dim: int
) -> tuple[siamor.ConstraintEntry, ...]:
    if any(entry.order != 1 for entry in spec.entries):
        raise fit_exceptions.InvalidConstraintError(
            "projection supports first-order entries only"
        )
    if not spec.entries:
        raise fit_exceptions.InvalidConstraintError("projection needs an entry")
    spec.validate_dim(dim)
    return spec.entries


def _exact_projection(
    values: np.ndarray, entries: Sequence[siamor.ConstraintEntry]
) -> np.ndarray:
    size = values.size
    index = np.arange(size).reshape(values.shape)
    columns = []
    for entry in entries:
        axis = entry.direction
        low = np.delete(index, -1, axis=axis).ravel()
        high = np.delete(index, 0, axis=axis).ravel()
        block = np.zeros((size, low.shape[0]))
        pairs = np.arange(low.shape[0])
        block[low, pairs] = -entry.sign
        block[high, pairs] = entry.sign
        columns.append(block)
    constraints = np.hstack(columns)
    program = qp.QuadraticProgram(
        hessian=np.eye(size),
        linear=values.ravel(),
        constraints=constraints,
        bounds=np.zeros(constraints.shape[1]),
    )
    return qp.solve_qp(program).w.reshape(values.shape)


def _dykstra_projection(
    values: np.ndarray,
    entries: Sequence[siamor.ConstraintEntry],
    registry: Optional[metrics.MetricRegistry],
    max_sweeps: int,
) -> np.ndarray:
    tolerance = SWEEP_TOLERANCE * (1.0 + float(np.abs(values).max()))
    x = np.array(values, dtype=float)
    increments = [np.zeros_like(x) for _ in entries]
    sweeps = 0
    while True:
        sweeps += 1
        previous = x
        for block, entry in enumerate(entries):
            shifted = x + increments[block]
            x = isotonic_along_axis(shifted, entry.direction, entry.sign)
            increments[block] = shifted - x
        change = float(np.abs(x - previous).max())
        violation = -min(
            0.0,
            *(
                float((entry.sign * np.diff(x, axis=entry.direction)).min(initial=0.0))
                for entry in entries
            ),
        )
        if change <= tolerance and violation <= tolerance:
            break
        if sweeps >= max_sweeps:
            logger.warning(
                "projection stopped after %d sweeps with change %.3g "
                "and violation %.3g",
                sweeps,
                change,
                violation,
            )
            raise fit_exceptions.MaxIterationsError(
                max_sweeps, what="Dykstra projection"
            )
    logger.debug("projection of %d values took %d sweeps", values.size, sweeps)
    if (counter := metrics.counter(registry, "shapeops.sweeps")) is not None:
        counter.increase(sweeps)
    return x
