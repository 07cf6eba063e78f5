"""Unit tests for the shapeops module."""

import itertools

import numpy as np
import pytest
import scipy.optimize

from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import shapeops
from shapefit.regression import siamor


def grid_2d(values):
    """Return a grid function on an integer grid of the values' shape."""
    values = np.asarray(values, dtype=float)
    rows, columns = values.shape
    return shapeops.GridFunction(
        coordinates=(np.arange(rows, dtype=float), np.arange(columns, dtype=float)),
        values=values,
    )


def increasing_both(rng, shape):
    """Return a random tensor nondecreasing along both axes."""
    steps = rng.uniform(size=shape)
    return np.cumsum(np.cumsum(steps, axis=0), axis=1) - rng.uniform(0.0, 5.0)


def isotonic_max_min(values):
    """Return the isotonic regression on a 2D grid by the max-min formula.

    The fitted value at x is the max over upper sets U containing x of the
    min over lower sets L containing x of the mean of the values in U and L.
    Lower sets of the grid order are staircases of nonincreasing row lengths.
    """
    rows, columns = values.shape
    lower = np.array(
        [
            [j < length for length in lengths[::-1] for j in range(columns)]
            for lengths in itertools.combinations_with_replacement(
                range(columns + 1), rows
            )
        ]
    )
    upper = ~lower
    flat = values.ravel()
    sums = upper.astype(float) @ (lower * flat).T
    counts = upper.astype(float) @ lower.astype(float).T
    with np.errstate(divide="ignore", invalid="ignore"):
        means = sums / counts
    result = np.empty(flat.shape)
    for x in range(flat.size):
        block = means[np.ix_(upper[:, x], lower[:, x])]
        result[x] = block.min(axis=1).max()
    return result.reshape(values.shape)


BOTH = siamor.ShapeConstraintSpec.from_signature([1, 1])
MIXED = siamor.ShapeConstraintSpec.from_signature([1, -1])


def test_pava_examples():
    """Test the pool-adjacent-violators algorithm on small inputs."""
    np.testing.assert_allclose(shapeops.pava_1d([3.0, 1.0, 2.0]), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(
        shapeops.pava_1d([1.0, 3.0, 2.0, 4.0]), [1.0, 2.5, 2.5, 4.0]
    )
    np.testing.assert_allclose(shapeops.pava_1d([1.0, 2.0, 3.0], sign=-1), 2.0)
    np.testing.assert_allclose(shapeops.pava_1d([5.0]), [5.0])
    with pytest.raises(ValueError):
        shapeops.pava_1d([])


def test_isotonic_lines(rng):
    """Test the batched line regression against PAVA and scipy."""
    for length in (2, 7, 30, 200):
        lines = rng.normal(size=(25, length)) + np.linspace(0.0, 1.0, length)
        for sign in (1, -1):
            result = shapeops.isotonic_lines(lines, sign)
            for line, fitted in zip(lines, result):
                np.testing.assert_allclose(fitted, shapeops.pava_1d(line, sign), atol=1e-10)
    line = rng.normal(size=50)
    np.testing.assert_allclose(
        shapeops.isotonic_lines(line[np.newaxis, :])[0],
        scipy.optimize.isotonic_regression(line).x,
        atol=1e-10,
    )


def test_projection_1d_is_pava(rng):
    """Test that a one-dimensional projection is isotonic regression."""
    spec = siamor.ShapeConstraintSpec.from_signature([1])
    for _ in range(200):
        length = int(rng.integers(1, 40))
        values = rng.normal(size=length)
        grid = shapeops.GridFunction(coordinates=(np.arange(length),), values=values)
        projected = shapeops.monotonic_projection_grid(grid, spec)
        np.testing.assert_allclose(projected.values, shapeops.pava_1d(values), atol=1e-10)
        dykstra = shapeops.monotonic_projection_grid(grid, spec, method=shapeops.DYKSTRA)
        np.testing.assert_allclose(dykstra.values, projected.values, atol=1e-10)


def test_projection_single_axis_2d():
    """Test a 2D projection constrained in one direction only."""
    grid = grid_2d([[1.0, 2.0], [0.0, 5.0]])
    spec = siamor.ShapeConstraintSpec.from_signature([1, 0])
    projected = shapeops.monotonic_projection_grid(grid, spec)
    np.testing.assert_allclose(projected.values, [[0.5, 2.0], [0.5, 5.0]])


def test_exact_projection_variational_inequality(rng):
    """Test the projection condition against random feasible points."""
    for _ in range(40):
        shape = tuple(int(n) for n in rng.integers(1, 5, size=2))
        values = rng.normal(size=shape) * 3.0
        projected = shapeops.monotonic_projection_grid(
            grid_2d(values), BOTH, method=shapeops.EXACT
        ).values
        assert shapeops.monotonicity_slack(grid_2d(projected), BOTH) >= -1e-9
        residual = values - projected
        for _ in range(50):
            feasible = increasing_both(rng, shape)
            assert np.sum(residual * (feasible - projected)) <= 1e-8


def test_exact_projection_matches_max_min_formula(rng):
    """Test small 2D projections against the max-min formula."""
    for _ in range(50):
        shape = tuple(int(n) for n in rng.integers(1, 5, size=2))
        signs = [int(s) for s in rng.choice([-1, 1], size=2)]
        spec = siamor.ShapeConstraintSpec.from_signature(signs)
        values = rng.normal(size=shape) * 2.0
        flip = [axis for axis, sign in enumerate(signs) if sign < 0]
        expected = np.flip(isotonic_max_min(np.flip(values, axis=flip)), axis=flip)

        projected = shapeops.monotonic_projection_grid(
            grid_2d(values), spec, method=shapeops.EXACT
        )
        np.testing.assert_allclose(projected.values, expected, atol=1e-6)


def test_dykstra_matches_exact(rng):
    """Test the iterative projection against the exact one."""
    registry = metrics.MetricRegistry()
    for spec in (BOTH, MIXED):
        for _ in range(10):
            values = rng.normal(size=(6, 7)) + np.arange(7)[np.newaxis, :] * 0.1
            grid = grid_2d(values)
            exact = shapeops.monotonic_projection_grid(grid, spec, method=shapeops.EXACT)
            dykstra = shapeops.monotonic_projection_grid(
                grid, spec, method=shapeops.DYKSTRA, registry=registry
            )
            np.testing.assert_allclose(dykstra.values, exact.values, atol=1e-6)
            assert shapeops.monotonicity_slack(dykstra, spec) >= -1e-9
    assert registry.get_metric("shapeops.sweeps").count >= 20


def test_projection_properties(rng):
    """Test idempotence and non-expansiveness."""
    shape = (25, 20)
    for method in (shapeops.AUTO, shapeops.DYKSTRA):
        first = grid_2d(rng.normal(size=shape))
        second = grid_2d(rng.normal(size=shape))
        p_first = shapeops.monotonic_projection_grid(first, MIXED, method)
        p_second = shapeops.monotonic_projection_grid(second, MIXED, method)

        again = shapeops.monotonic_projection_grid(p_first, MIXED, method)
        np.testing.assert_allclose(again.values, p_first.values, atol=1e-9)
        distance = np.linalg.norm(p_first.values - p_second.values)
        assert distance <= np.linalg.norm(first.values - second.values) + 1e-8


def test_feasible_values_are_fixed(rng):
    """Test that monotone values are returned unchanged."""
    values = increasing_both(rng, (5, 6))
    projected = shapeops.monotonic_projection_grid(grid_2d(values), BOTH)
    np.testing.assert_allclose(projected.values, values, atol=1e-10)


def test_projection_errors():
    """Test rejected projection requests."""
    grid = grid_2d(np.zeros((2, 2)))
    concave = siamor.ShapeConstraintSpec.from_signature([1, 0], concave=[0])
    with pytest.raises(fit_exceptions.InvalidConstraintError):
        shapeops.monotonic_projection_grid(grid, concave)
    with pytest.raises(fit_exceptions.InvalidConstraintError):
        shapeops.monotonic_projection_grid(grid, siamor.ShapeConstraintSpec())
    with pytest.raises(fit_exceptions.InvalidConstraintError):
        shapeops.monotonic_projection_grid(
            grid, siamor.ShapeConstraintSpec.from_signature([1, 1, 1])
        )
    with pytest.raises(ValueError):
        shapeops.monotonic_projection_grid(grid, BOTH, method="newton")


def test_grid_function():
    """Test grid construction and sampling."""
    grid = shapeops.GridFunction.from_function(
        (np.array([0.0, 1.0]), np.array([0.0, 0.5, 1.0])),
        lambda points: points[:, 0] + 10.0 * points[:, 1],
        chunk_size=4,
    )
    assert grid.shape == (2, 3)
    np.testing.assert_allclose(grid.values, [[0.0, 5.0, 10.0], [1.0, 6.0, 11.0]])
    np.testing.assert_allclose(grid.lower, [0.0, 0.0])
    np.testing.assert_allclose(grid.upper, [1.0, 1.0])
    np.testing.assert_allclose(grid.step_sizes[1], [0.5, 0.5])
    np.testing.assert_allclose(grid.points()[4], [1.0, 0.5])

    with pytest.raises(ValueError):
        shapeops.GridFunction(coordinates=(np.array([0.0, 0.0]),), values=[1.0, 2.0])
    with pytest.raises(ValueError):
        shapeops.GridFunction(coordinates=(np.array([0.0, 1.0]),), values=[1.0])


def test_rearrangement():
    """Test sorting of 1D grid values."""
    grid = shapeops.GridFunction(coordinates=([0.0, 1.0, 2.0],), values=[3.0, 1.0, 2.0])
    np.testing.assert_array_equal(shapeops.rearrangement_1d(grid).values, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(
        shapeops.rearrangement_1d(grid, sign=-1).values, [3.0, 2.0, 1.0]
    )
    with pytest.raises(fit_exceptions.DimensionMismatchError):
        shapeops.rearrangement_1d(grid_2d(np.zeros((2, 2))))


def test_eval_grid_constant():
    """Test the piecewise-constant extension."""
    grid = shapeops.GridFunction(
        coordinates=([0.0, 1.0, 2.0],), values=[10.0, 20.0, 30.0]
    )
    assert shapeops.eval_grid_constant(grid, [0.5]) == 10.0
    assert shapeops.eval_grid_constant(grid, [1.0]) == 20.0
    assert shapeops.eval_grid_constant(grid, [2.0]) == 30.0
    with pytest.raises(ValueError):
        shapeops.eval_grid_constant(grid, [2.5])
    with pytest.raises(fit_exceptions.DimensionMismatchError):
        shapeops.eval_grid_constant(grid, [0.5, 0.5])

    plane = grid_2d([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(
        shapeops.eval_grid_constant_many(plane, np.array([[0.2, 0.9], [1.0, 0.5], [1.0, 1.0]])),
        [1.0, 3.0, 4.0],
    )


@pytest.mark.slow
def test_projection_4d(rng):
    """Test the iterative projection on a 40^4 grid."""
    axis = np.linspace(0.0, 1.0, 40)
    values = rng.normal(size=(40,) * 4) + axis[:, None, None, None]
    grid = shapeops.GridFunction(coordinates=(axis,) * 4, values=values)
    spec = siamor.ShapeConstraintSpec.from_signature([1, -1, 0, 1])
    projected = shapeops.monotonic_projection_grid(grid, spec)
    assert shapeops.monotonicity_slack(projected, spec) >= -1e-8


def test_dykstra_sweep_cap(rng):
    """Test that running out of sweeps raises instead of returning."""
    grid = grid_2d(rng.normal(size=(6, 7)))
    with pytest.raises(fit_exceptions.MaxIterationsError):
        shapeops.monotonic_projection_grid(
            grid, BOTH, method=shapeops.DYKSTRA, max_sweeps=1
        )

    feasible = grid_2d(increasing_both(rng, (6, 7)))
    result = shapeops.monotonic_projection_grid(
        feasible, BOTH, method=shapeops.DYKSTRA, max_sweeps=1
    )
    np.testing.assert_array_equal(result.values, feasible.values)

    with pytest.raises(ValueError):
        shapeops.monotonic_projection_grid(grid, BOTH, max_sweeps=0)
