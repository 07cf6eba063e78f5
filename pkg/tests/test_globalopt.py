"""Unit tests for the globalopt module."""

import numpy as np
import pytest

from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import basis
from shapefit.regression import globalopt
from shapefit.regression import grids


def star_discrepancy(points: np.ndarray, resolution: int = 50) -> float:
    """Estimate the star discrepancy in 2D on anchored boxes of a grid."""
    corners = np.linspace(1.0 / resolution, 1.0, resolution)
    worst = 0.0
    for a in corners:
        for b in corners:
            inside = np.mean((points[:, 0] < a) & (points[:, 1] < b))
            worst = max(worst, abs(inside - a * b))
    return worst


def test_sobol_points():
    """Test containment, distinctness and determinism of Sobol points."""
    unit = globalopt.Box.unit(1)
    first = globalopt.sobol_points(1, unit)
    assert first.shape == (1, 1)
    assert unit.contains(first[0])
    np.testing.assert_array_equal(first, globalopt.sobol_points(1, unit))

    square = globalopt.Box.unit(2)
    points = globalopt.sobol_points(4, square)
    assert len({tuple(point) for point in points}) == 4
    assert all(square.contains(point) for point in points)

    box = globalopt.Box(lower=[871.0, 0.0], upper=[933.0, 4.0])
    points = globalopt.sobol_points(200, box)
    assert all(box.contains(point) for point in points)

    with pytest.raises(ValueError):
        globalopt.sobol_points(0, unit)


def test_sobol_discrepancy(rng):
    """Test that Sobol points are more uniform than random ones."""
    sobol = globalopt.sobol_points(200, globalopt.Box.unit(2))
    random = rng.uniform(size=(200, 2))
    assert star_discrepancy(sobol) < star_discrepancy(random)


def test_box():
    """Test box validation and helpers."""
    box = globalopt.Box(lower=[0.0, 1.0], upper=[1.0, 1.0])
    assert box.dim == 2
    np.testing.assert_array_equal(box.clip(np.array([2.0, 0.0])), [1.0, 1.0])
    with pytest.raises(ValueError):
        globalopt.Box(lower=[1.0], upper=[0.0])
    with pytest.raises(ValueError):
        globalopt.Box(lower=[0.0, 0.0], upper=[1.0])


def test_minimize_examples():
    """Test one-dimensional objectives with known minima."""
    unit = globalopt.Box.unit(1)

    result = globalopt.minimize_box(
        lambda x: ((x[0] - 0.3) ** 2, np.array([2.0 * (x[0] - 0.3)])), unit
    )
    assert result.argmin[0] == pytest.approx(0.3, abs=1e-6)
    assert result.value == pytest.approx(0.0, abs=1e-6)
    assert result.local_restarts == 100

    result = globalopt.minimize_box(lambda x: (x[0], np.array([1.0])), unit)
    assert result.argmin[0] == 0.0
    assert result.value == 0.0

    box = globalopt.Box(lower=[-1.5], upper=[1.5])
    result = globalopt.minimize_box(
        lambda x: (x[0] ** 4 - x[0] ** 2, np.array([4.0 * x[0] ** 3 - 2.0 * x[0]])),
        box,
        restarts=20,
    )
    assert result.value == pytest.approx(-0.25, abs=1e-8)
    assert abs(result.argmin[0]) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-4)


def test_containment_and_reevaluation():
    """Test that steps leaving the box are projected back."""
    box = globalopt.Box(lower=[0.0, 0.0], upper=[1.0, 2.0])

    def objective(x):
        return -x[0] - x[1], np.array([-1.0, -1.0])

    result = globalopt.minimize_box(objective, box, restarts=8)
    assert box.contains(result.argmin)
    np.testing.assert_allclose(result.argmin, [1.0, 2.0])
    assert result.value == objective(result.argmin)[0]


def test_polynomials_against_grid(rng):
    """Test random polynomial objectives against a fine grid minimum."""
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        spec = basis.BasisSpec(dim=dim, degree=int(rng.integers(2, 9)))
        w = rng.normal(size=spec.num_terms)
        polynomial = basis.MonomialSum.derivative_of(spec, w, (0,) * dim)
        box = globalopt.Box.unit(dim)
        result = globalopt.minimize_box(polynomial.value_and_gradient, box)

        points = grids.tensor_points(grids.unit_axes(dim, 200))
        grid_minimum = float((basis.design_matrix(spec, points) @ w).min())
        assert result.value <= grid_minimum + 1e-6


def test_determinism_and_workers():
    """Test that threads do not change the result."""
    box = globalopt.Box.unit(2)

    def objective(x):
        value = np.sin(5.0 * x[0]) * np.cos(3.0 * x[1]) + 0.1 * x[0]
        gradient = np.array(
            [
                5.0 * np.cos(5.0 * x[0]) * np.cos(3.0 * x[1]) + 0.1,
                -3.0 * np.sin(5.0 * x[0]) * np.sin(3.0 * x[1]),
            ]
        )
        return value, gradient

    serial = globalopt.minimize_box(objective, box)
    again = globalopt.minimize_box(objective, box)
    threaded = globalopt.minimize_box(objective, box, workers=4)
    np.testing.assert_array_equal(serial.argmin, again.argmin)
    np.testing.assert_array_equal(serial.argmin, threaded.argmin)
    assert serial.value == threaded.value


def test_metrics_and_errors():
    """Test restart counters and non-finite objectives."""
    registry = metrics.MetricRegistry()
    box = globalopt.Box.unit(1)
    globalopt.minimize_box(
        lambda x: (x[0] ** 2, np.array([2.0 * x[0]])), box, restarts=7, registry=registry
    )
    assert registry.get_metric("globalopt.restarts").count == 7
    assert 0 <= registry.get_metric("globalopt.converged").count <= 7

    with pytest.raises(fit_exceptions.NonFiniteObjectiveError):
        globalopt.minimize_box(lambda x: (np.nan, np.zeros(1)), box, restarts=2)
    with pytest.raises(ValueError):
        globalopt.minimize_box(lambda x: (0.0, np.zeros(1)), box, restarts=0)
