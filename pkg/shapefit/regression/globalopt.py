# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Approximate global minimization of smooth functions over a box.

The global phase is a deterministic multistart from unscrambled Sobol points;
every start runs the box-projected quasi-Newton method L-BFGS-B with the
caller's analytic gradient.
"""

import concurrent.futures
import dataclasses
import logging
import warnings

import numpy as np
import scipy.optimize

from scipy.stats import qmc
from typing import Callable, Optional

from shapefit import fit_exceptions
from shapefit import metrics


logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]
"""A function returning the value and the gradient at a point."""

GRADIENT_TOLERANCE = 1e-8
"""Projected-gradient infinity norm at which a local run stops."""

LOCAL_ITERATIONS = 200
"""Iteration cap of one local run."""

RESTARTS_PER_DIMENSION = 100
"""Default number of multistart points per box dimension."""


@dataclasses.dataclass(frozen=True)
class Box:
    """An axis-aligned box [a_1, b_1] x ... x [a_d, b_d].

    Zero-width directions (a_j = b_j) are allowed.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length.")
        if np.any(lower > upper) or not np.all(np.isfinite(lower + upper)):
            raise ValueError(f"invalid box bounds {lower} and {upper}.")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, dim: int) -> "Box":
        """Return the unit box [0, 1]^dim."""
        return cls(lower=np.zeros(dim), upper=np.ones(dim))

    @property
    def dim(self) -> int:
        """int: The number of directions."""
        return self.lower.shape[0]

    def contains(self, x: np.ndarray) -> bool:
        """Return `True` if `x` lies in the box, bounds included."""
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x: np.ndarray) -> np.ndarray:
        """Return the projection of `x` onto the box."""
        return np.clip(x, self.lower, self.upper)


@dataclasses.dataclass(frozen=True)
class GlobalMinResult:
    """The best point of a multistart run.

    Attributes
    ----------
    argmin: `numpy.ndarray`
        The best point found, inside the box.
    value: `float`
        The objective value at `argmin`, re-evaluated there.
    local_restarts: `int`
        The number of local runs.
    converged_restarts: `int`
        The number of local runs that met the gradient tolerance.
    """

    argmin: np.ndarray
    value: float
    local_restarts: int
    converged_restarts: int


def sobol_points(n: int, box: Box) -> np.ndarray:
    """Return the first n points of the unscrambled Sobol sequence in the box.

    Parameters
    ----------
    n: `int`
        The number of points, at least 1.
    box: `Box`
        The target box; unit-cube points are mapped affinely into it.

    Returns
    -------
    `numpy.ndarray`
        The (n, d) points; identical for identical arguments.
    """
    if n < 1:
        raise ValueError(f"number of Sobol points must be positive, got {n}.")
    sampler = qmc.Sobol(d=box.dim, scramble=False)
    with warnings.catch_warnings():
        # n need not be a power of two here.
        warnings.simplefilter("ignore", category=UserWarning)
        unit = sampler.random(n)
    return box.lower + unit * (box.upper - box.lower)


def minimize_box(
    objective: Objective,
    box: Box,
    restarts: Optional[int] = None,
    workers: int = 1,
    registry: Optional[metrics.MetricRegistry] = None,
) -> GlobalMinResult:
    """Approximately minimize a smooth function over a box.

    Parameters
    ----------
    objective: `Objective`
        Returns ``(value, gradient)``; must tolerate concurrent calls when
        `workers` > 1.
    box: `Box`
        The feasible box.
    restarts: `Optional[int]`
        The number of Sobol start points; 100 d by default.
    workers: `int`
        The number of threads running local searches.
    registry: `Optional[metrics.MetricRegistry]`
        Receives the ``globalopt.restarts`` and ``globalopt.converged`` counts.

    Returns
    -------
    `GlobalMinResult`
        The best point over all starts and local runs; ties keep the first
        start in Sobol order.

    Raises
    ------
    `NonFiniteObjectiveError`
        If the objective or its gradient is not finite somewhere.
    """
    count = restarts if restarts is not None else RESTARTS_PER_DIMENSION * box.dim
    if count < 1:
        raise ValueError(f"restarts must be positive, got {count}.")
    starts = sobol_points(count, box)
    checked = _checked(objective)

    def run(start: np.ndarray) -> tuple[np.ndarray, float, bool]:
        return _local_search(checked, start, box)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            # map() preserves the Sobol order of the results.
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(start) for start in starts]

    best_x = outcomes[0][0]
    best_value = np.inf
    converged = 0
    for x, value, success in outcomes:
        converged += int(success)
        if value < best_value:
            best_x, best_value = x, value

    best_x = box.clip(best_x)
    value, _ = checked(best_x)
    logger.debug(
        "multistart over %d starts: best value %.6g, %d converged",
        count,
        value,
        converged,
    )
    if (restart_counter := metrics.counter(registry, "globalopt.restarts")) is not None:
        restart_counter.increase(count)
    if (converged_counter := metrics.counter(registry, "globalopt.converged")) is not None:
        converged_counter.increase(converged)
    return GlobalMinResult(
        argmin=best_x,
        value=float(value),
        local_restarts=count,
        converged_restarts=converged,
    )


def _local_search(
    objective: Objective, start: np.ndarray, box: Box
) -> tuple[np.ndarray, float, bool]:
    start_value, _ = objective(start)
    if np.all(box.lower == box.upper):
        return start, start_value, True
    result = scipy.optimize.minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=scipy.optimize.Bounds(box.lower, box.upper),
        options={
            "gtol": GRADIENT_TOLERANCE,
            "ftol": np.finfo(float).eps,
            "maxiter": LOCAL_ITERATIONS,
        },
    )
    x = box.clip(result.x)
    value = float(result.fun)
    # A local run never reports a point worse than its start.
    if not value <= start_value:
        return start, start_value, bool(result.success)
    return x, value, bool(result.success)


def _checked(objective: Objective) -> Objective:
    def wrapped(x: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = objective(x)
        gradient = np.asarray(gradient, dtype=float)
        if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
            raise fit_exceptions.NonFiniteObjectiveError(x)
        return float(value), gradient

    return wrapped
