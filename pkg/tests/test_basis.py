"""Unit tests for the basis module."""

import itertools
import math

import numpy as np
import pytest

from shapefit import fit_exceptions
from shapefit.regression import basis


def test_enumeration():
    """Test graded-lex enumeration and its counts."""
    indices = basis.enumerate_multi_indices(d=2, m=1)
    assert [index.exponents for index in indices] == [(0, 0), (0, 1), (1, 0)]

    indices = basis.enumerate_multi_indices(d=2, m=2)
    assert [index.exponents for index in indices] == [
        (0, 0),
        (0, 1),
        (1, 0),
        (0, 2),
        (1, 1),
        (2, 0),
    ]
    assert [index.degree for index in indices] == [0, 1, 1, 2, 2, 2]

    assert len(basis.enumerate_multi_indices(d=2, m=7)) == 36
    assert len(basis.enumerate_multi_indices(d=4, m=6)) == 210
    assert basis.enumerate_multi_indices(3, 4) == basis.enumerate_multi_indices(3, 4)

    indices = basis.enumerate_multi_indices(d=3, m=5)
    assert len(set(indices)) == len(indices)

    for d in range(1, 5):
        for m in range(0, 6):
            expected = sorted(
                (e for e in itertools.product(range(m + 1), repeat=d) if sum(e) <= m),
                key=lambda e: (sum(e), e),
            )
            exponents = [index.exponents for index in basis.enumerate_multi_indices(d, m)]
            assert exponents == expected

    assert len(basis.enumerate_multi_indices(d=12, m=3)) == math.comb(15, 3)


def test_num_terms():
    """Test the number of monomials."""
    assert basis.num_terms(d=1, m=0) == 1
    assert basis.num_terms(d=2, m=7) == 36
    assert basis.num_terms(d=4, m=6) == 210

    for d in range(1, 6):
        for m in range(0, 9):
            total = sum(math.comb(k + d - 1, d - 1) for k in range(m + 1))
            assert basis.num_terms(d, m) == total
            assert len(basis.enumerate_multi_indices(d, m)) == total

    with pytest.raises(ValueError):
        basis.num_terms(d=0, m=2)
    with pytest.raises(ValueError):
        basis.enumerate_multi_indices(d=0, m=2)
    with pytest.raises(OverflowError):
        basis.num_terms(d=200, m=200)


def test_eval_basis():
    """Test basis evaluation at single points."""
    np.testing.assert_array_equal(
        basis.eval_basis(basis.BasisSpec(dim=1, degree=2), [2.0]), [1.0, 2.0, 4.0]
    )
    np.testing.assert_array_equal(
        basis.eval_basis(basis.BasisSpec(dim=2, degree=1), [3.0, 5.0]),
        [1.0, 5.0, 3.0],
    )
    np.testing.assert_array_equal(
        basis.eval_basis(basis.BasisSpec(dim=2, degree=2), [0.0, 0.0]),
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )

    with pytest.raises(fit_exceptions.DimensionMismatchError):
        basis.eval_basis(basis.BasisSpec(dim=2, degree=2), [1.0, 2.0, 3.0])


def test_eval_basis_partial():
    """Test exact monomial derivatives."""
    spec = basis.BasisSpec(dim=2, degree=2)
    # (1, 1) is the monomial x1 * x2.
    assert basis.eval_basis_partial(spec, [7.0, 4.0], direction=0, order=1)[4] == 4.0
    assert basis.eval_basis_partial(spec, [7.0, 4.0], direction=1, order=1)[4] == 7.0
    assert basis.eval_basis_partial(spec, [7.0, 4.0], direction=0, order=1)[0] == 0.0

    cubic = basis.BasisSpec(dim=1, degree=3)
    assert basis.eval_basis_partial(cubic, [2.0], direction=0, order=2)[3] == 12.0
    np.testing.assert_array_equal(
        basis.eval_basis_partial(cubic, [2.0], direction=0, order=2),
        [0.0, 0.0, 2.0, 12.0],
    )

    with pytest.raises(ValueError):
        basis.eval_basis_partial(spec, [1.0, 1.0], direction=2, order=1)
    with pytest.raises(ValueError):
        basis.eval_basis_partial(spec, [1.0, 1.0], direction=0, order=3)


def test_design_matrix():
    """Test design matrices."""
    np.testing.assert_array_equal(
        basis.design_matrix(basis.BasisSpec(dim=1, degree=1), np.array([0.0, 1.0])),
        [[1.0, 0.0], [1.0, 1.0]],
    )
    np.testing.assert_array_equal(
        basis.design_matrix(basis.BasisSpec(dim=1, degree=2), np.array([[2.0]])),
        [[1.0, 2.0, 4.0]],
    )
    points = np.array([[0.3, 0.1], [5.0, -2.0], [1.0, 1.0]])
    np.testing.assert_array_equal(
        basis.design_matrix(basis.BasisSpec(dim=2, degree=0), points), np.ones((3, 1))
    )

    spec = basis.BasisSpec(dim=2, degree=3)
    matrix = basis.design_matrix(spec, points)
    for row, point in zip(matrix, points):
        np.testing.assert_array_equal(row, basis.eval_basis(spec, point))

    with pytest.raises(ValueError):
        basis.design_matrix(spec, np.empty((0, 2)))
    with pytest.raises(fit_exceptions.DimensionMismatchError):
        basis.design_matrix(spec, np.ones((3, 3)))


def test_derivatives_match_finite_differences(rng):
    """Test analytic derivatives against central finite differences."""
    step = 1e-5
    for _ in range(1000):
        dim = int(rng.integers(1, 4))
        spec = basis.BasisSpec(dim=dim, degree=int(rng.integers(1, 7)))
        w = rng.normal(size=spec.num_terms)
        x = rng.uniform(0.1, 0.9, size=dim)
        j = int(rng.integers(0, dim))
        order = int(rng.integers(1, 3))
        shift = np.zeros(dim)
        shift[j] = step

        analytic = basis.eval_basis_partial(spec, x, direction=j, order=order) @ w
        if order == 1:
            def function(point):
                return basis.eval_basis(spec, point) @ w
        else:
            def function(point):
                return basis.eval_basis_partial(spec, point, direction=j, order=1) @ w
        numeric = (function(x + shift) - function(x - shift)) / (2.0 * step)
        assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-6)


def test_mixed_derivatives():
    """Test mixed partial derivatives of a product monomial."""
    spec = basis.BasisSpec(dim=2, degree=3)
    points = np.array([[2.0, 3.0]])
    # Column 7 is (1, 2): x1 * x2^2.
    assert spec.exponents[7].tolist() == [1, 2]
    assert basis.derivative_matrix(spec, points, (1, 1))[0, 7] == 2.0 * 3.0
    assert basis.derivative_matrix(spec, points, (1, 2))[0, 7] == 2.0
    assert basis.derivative_matrix(spec, points, (2, 0))[0, 7] == 0.0


def test_monomial_sum(rng):
    """Test value and gradient of a differentiated polynomial."""
    spec = basis.BasisSpec(dim=3, degree=5)
    w = rng.normal(size=spec.num_terms)
    x = rng.uniform(0.0, 1.0, size=3)
    derivative = basis.MonomialSum.derivative_of(spec, w, (0, 2, 0))

    value, gradient = derivative.value_and_gradient(x)
    points = x[np.newaxis, :]
    assert value == pytest.approx(basis.derivative_matrix(spec, points, (0, 2, 0))[0] @ w)
    for k, orders in enumerate([(1, 2, 0), (0, 3, 0), (0, 2, 1)]):
        expected = basis.derivative_matrix(spec, points, orders)[0] @ w
        assert gradient[k] == pytest.approx(expected, abs=1e-10)

    constant = basis.MonomialSum.derivative_of(
        basis.BasisSpec(dim=2, degree=1), np.array([3.0, 0.0, 0.0]), (1, 0)
    )
    value, gradient = constant.value_and_gradient(np.array([0.5, 0.5]))
    assert value == 0.0
    np.testing.assert_array_equal(gradient, [0.0, 0.0])
