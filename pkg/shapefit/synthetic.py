# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Synthetic sparse data sets with known shape.

Every scenario has a ground truth that satisfies its shape constraints. The
generated targets are the truth plus optional Gaussian noise and an optional
localized dip that breaks monotonicity, which is what makes unconstrained
models go wrong on sparse data. The formulas are documented in
``docs/synthetic.rst``.
"""

import dataclasses
import math

import numpy as np

from typing import Callable, Optional

from shapefit import dataset as data
from shapefit.regression import grids
from shapefit.regression import siamor


BUMP_CENTER = 0.85
"""Center of the dip in scaled input coordinates, every direction."""

BUMP_WIDTH = 0.1
"""Standard deviation of the dip in scaled input coordinates."""

LINE = "line"
GRID = "grid"
UNIFORM = "uniform"


@dataclasses.dataclass(frozen=True)
class Scenario:
    """A ground-truth function on a box with its sampling layout.

    Attributes
    ----------
    name: `str`
        The scenario name used on the command line.
    default_size: `int`
        The number of points generated by default.
    lower: `tuple[float, ...]`
        The lower corner of the input box, raw units.
    upper: `tuple[float, ...]`
        The upper corner of the input box, raw units.
    signature: `tuple[int, ...]`
        The monotonicity signature the truth satisfies.
    concave: `tuple[int, ...]`
        The 0-based directions in which the truth is concave.
    truth: `Callable[[numpy.ndarray], numpy.ndarray]`
        The ground truth on raw (n, d) inputs.
    layout: `str`
        ``line`` (equidistant, 1D), ``grid`` (square tensor grid) or
        ``uniform`` (independent uniform draws).
    degree: `int`
        A shape-constrained degree that fits the default sample closely.
    reference_degree: `int`
        The least-squares degree whose monotonized fit competes best.
    """

    name: str
    default_size: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    signature: tuple[int, ...]
    concave: tuple[int, ...]
    truth: Callable[[np.ndarray], np.ndarray]
    layout: str
    degree: int
    reference_degree: int

    @property
    def dim(self) -> int:
        """int: The input dimension."""
        return len(self.lower)

    @property
    def spec(self) -> siamor.ShapeConstraintSpec:
        """ShapeConstraintSpec: The constraints the truth satisfies."""
        return siamor.ShapeConstraintSpec.from_signature(
            self.signature, concave=self.concave
        )

    def sample_inputs(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Return `size` raw input points in the scenario's layout."""
        if self.layout == LINE:
            return np.linspace(self.lower[0], self.upper[0], size)[:, np.newaxis]
        if self.layout == GRID:
            side = math.isqrt(size)
            if side * side != size or side < 2:
                raise ValueError(
                    f"scenario {self.name} needs a square number of points "
                    f"of at least 4, got {size}."
                )
            axes = grids.equidistant_axes(self.lower, self.upper, side)
            return grids.tensor_points(axes)
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


def _logistic(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _sigmoid_truth(inputs: np.ndarray) -> np.ndarray:
    return 10.0 + 40.0 * _logistic((inputs[:, 0] - 520.0) / 12.0)


def _glass_truth(inputs: np.ndarray) -> np.ndarray:
    temperature = (inputs[:, 0] - 480.0) / 80.0
    cycles = (inputs[:, 1] - 40.0) / 10.0
    return 10.0 + 60.0 * _logistic(8.0 * (0.7 * temperature + 0.3 * cycles - 0.5))


def _press_truth(inputs: np.ndarray) -> np.ndarray:
    furnace, handling, force, quench = inputs.T
    return (
        300.0
        + 150.0 * _logistic((furnace - 900.0) / 10.0)
        - 15.0 * handling
        + 8.0 * np.sin(2.0 * np.pi * (force - 1750.0) / 500.0)
        + 120.0 * (1.0 - np.exp(-(quench - 2.0) / 1.5))
    )


def _poly_truth(inputs: np.ndarray) -> np.ndarray:
    x = inputs[:, 0]
    return 1.0 + 2.0 * x + x**3


SCENARIOS: dict[str, Scenario] = {
    scenario.name: scenario
    for scenario in (
        Scenario(
            name="sigmoid1d",
            default_size=6,
            lower=(480.0,),
            upper=(560.0,),
            signature=(1,),
            concave=(),
            truth=_sigmoid_truth,
            layout=LINE,
            degree=5,
            reference_degree=3,
        ),
        Scenario(
            name="glass2d",
            default_size=25,
            lower=(480.0, 40.0),
            upper=(560.0, 50.0),
            signature=(1, 1),
            concave=(),
            truth=_glass_truth,
            layout=GRID,
            degree=7,
            reference_degree=3,
        ),
        Scenario(
            name="press4d",
            default_size=60,
            lower=(871.0, 0.0, 1750.0, 2.0),
            upper=(933.0, 4.0, 2250.0, 6.0),
            signature=(1, -1, 0, 1),
            concave=(3,),
            truth=_press_truth,
            layout=UNIFORM,
            degree=6,
            reference_degree=3,
        ),
        Scenario(
            name="mono-poly",
            default_size=20,
            lower=(0.0,),
            upper=(1.0,),
            signature=(1,),
            concave=(),
            truth=_poly_truth,
            layout=LINE,
            degree=3,
            reference_degree=3,
        ),
    )
}
"""All scenarios by name."""


def get_scenario(name: str) -> Scenario:
    """Return a scenario by name; unknown names raise `ValueError`."""
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}."
        ) from None


def generate(
    name: str,
    seed: int = 0,
    size: Optional[int] = None,
    noise: float = 0.0,
    bump: float = 0.0,
) -> data.Dataset:
    """Generate a scenario's data set.

    Parameters
    ----------
    name: `str`
        The scenario name.
    seed: `int`
        Seed of the random generator; equal arguments give equal data.
    size: `Optional[int]`
        The number of points; the scenario's default when omitted.
    noise: `float`
        Noise standard deviation as a fraction of the truth's range.
    bump: `float`
        Depth of the dip as a fraction of the truth's range.

    Returns
    -------
    `Dataset`
        Raw-unit inputs and targets.
    """
    scenario = get_scenario(name)
    size = size if size is not None else scenario.default_size
    if size < 1:
        raise ValueError(f"size must be positive, got {size}.")
    if noise < 0.0 or bump < 0.0:
        raise ValueError("noise and bump must be nonnegative.")

    rng = np.random.default_rng(seed)
    inputs = scenario.sample_inputs(size, rng)
    truth = scenario.truth(inputs)
    span = float(truth.max() - truth.min()) or 1.0

    lower = np.asarray(scenario.lower)
    upper = np.asarray(scenario.upper)
    scaled = (inputs - lower) / (upper - lower)
    distance = ((scaled - BUMP_CENTER) ** 2).sum(axis=1)
    dip = bump * span * np.exp(-distance / (2.0 * BUMP_WIDTH**2))
    # One draw per point at every noise level.
    disturbance = rng.standard_normal(size)
    targets = truth - dip + noise * span * disturbance
    return data.Dataset(inputs=inputs, targets=targets)
