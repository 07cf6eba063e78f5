# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Multivariate monomial bases, their derivatives and design matrices."""

import dataclasses
import functools
import math
import sys

import numpy as np

from typing import Sequence

from shapefit import fit_exceptions


GRADED_LEX = "graded-lex"
"""Name of the only supported multi-index ordering."""


@dataclasses.dataclass(frozen=True)
class MultiIndex:
    """Exponent vector of one monomial x_1^a_1 * ... * x_d^a_d."""

    exponents: tuple[int, ...]

    @property
    def degree(self) -> int:
        """int: The total degree, the sum of all exponents."""
        return sum(self.exponents)


def num_terms(d: int, m: int) -> int:
    """Return the number of d-variate monomials of degree at most m.

    Parameters
    ----------
    d: `int`
        The number of input dimensions, at least 1.
    m: `int`
        The maximal total degree, at least 0.

    Returns
    -------
    `int`
        The binomial coefficient C(m + d, m).

    Raises
    ------
    `ValueError`
        If `d` < 1 or `m` < 0.
    `OverflowError`
        If the count does not fit into an array index.
    """
    _check_dim_degree(d=d, m=m)
    count = math.comb(m + d, m)
    if count > sys.maxsize:
        raise OverflowError(f"C({m + d}, {m}) exceeds the largest array size.")
    return count


def enumerate_multi_indices(d: int, m: int) -> list[MultiIndex]:
    """Enumerate all multi-indices of degree at most m in graded-lex order.

    Degrees ascend; within one degree the exponent tuples ascend
    lexicographically with the first exponent most significant.

    Examples
    --------
    >>> [index.exponents for index in enumerate_multi_indices(2, 1)]
    [(0, 0), (0, 1), (1, 0)]
    """
    _check_dim_degree(d=d, m=m)
    result: list[MultiIndex] = []
    for degree in range(m + 1):
        for exponents in _compositions(d=d, total=degree):
            result.append(MultiIndex(exponents=exponents))
    return result


@dataclasses.dataclass(frozen=True)
class BasisSpec:
    """A monomial basis of a fixed dimension and maximal degree.

    Attributes
    ----------
    dim: `int`
        The number of input dimensions d.
    degree: `int`
        The maximal total degree m.
    ordering: `str`
        The multi-index ordering; only ``"graded-lex"`` exists.
    """

    dim: int
    degree: int
    ordering: str = GRADED_LEX

    def __post_init__(self) -> None:
        _check_dim_degree(d=self.dim, m=self.degree)
        if self.ordering != GRADED_LEX:
            raise ValueError(f"unknown multi-index ordering {self.ordering!r}.")

    @property
    def num_terms(self) -> int:
        """int: The number of basis functions N_m."""
        return num_terms(d=self.dim, m=self.degree)

    @functools.cached_property
    def exponents(self) -> np.ndarray:
        """numpy.ndarray: The (N_m, d) exponent matrix in basis order."""
        indices = enumerate_multi_indices(d=self.dim, m=self.degree)
        table = np.array([index.exponents for index in indices], dtype=np.int64)
        table.setflags(write=False)
        return table


def eval_basis(spec: BasisSpec, x: Sequence[float]) -> np.ndarray:
    """Evaluate all basis monomials at one point.

    Parameters
    ----------
    spec: `BasisSpec`
        The basis.
    x: `Sequence[float]`
        A point of dimension ``spec.dim``.

    Returns
    -------
    `numpy.ndarray`
        The vector phi(x) of length N_m.

    Examples
    --------
    >>> eval_basis(BasisSpec(dim=2, degree=1), [3.0, 5.0])
    array([1., 5., 3.])
    """
    return design_matrix(spec, _single_point(spec, x))[0]


def eval_basis_partial(
    spec: BasisSpec, x: Sequence[float], direction: int, order: int
) -> np.ndarray:
    """Evaluate a pure partial derivative of all basis monomials at one point.

    Parameters
    ----------
    spec: `BasisSpec`
        The basis.
    x: `Sequence[float]`
        A point of dimension ``spec.dim``.
    direction: `int`
        The 0-based coordinate direction j.
    order: `int`
        The derivative order, 1 or 2.

    Returns
    -------
    `numpy.ndarray`
        The vector of d^order/dx_j^order of each monomial at `x`.
    """
    return design_matrix_partial(
        spec, _single_point(spec, x), direction=direction, order=order
    )[0]


def design_matrix(spec: BasisSpec, points: np.ndarray) -> np.ndarray:
    """Return the (N, N_m) matrix whose row l is phi(x_l).

    Raises
    ------
    `ValueError`
        If `points` is empty.
    `DimensionMismatchError`
        If the points are not of dimension ``spec.dim``.
    """
    points = _as_points(spec, points)
    return derivative_matrix(spec, points, orders=(0,) * spec.dim)


def design_matrix_partial(
    spec: BasisSpec, points: np.ndarray, direction: int, order: int
) -> np.ndarray:
    """Return the matrix of d^order/dx_j^order phi evaluated at every point."""
    points = _as_points(spec, points)
    if not 0 <= direction < spec.dim:
        raise ValueError(
            f"direction {direction} is outside 0..{spec.dim - 1} for this basis."
        )
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}.")
    orders = [0] * spec.dim
    orders[direction] = order
    return derivative_matrix(spec, points, orders=tuple(orders))


def derivative_matrix(
    spec: BasisSpec, points: np.ndarray, orders: Sequence[int]
) -> np.ndarray:
    """Return the mixed partial derivative of every monomial at every point.

    Parameters
    ----------
    spec: `BasisSpec`
        The basis.
    points: `numpy.ndarray`
        The (N, d) evaluation points.
    orders: `Sequence[int]`
        Nonnegative derivative order per direction.

    Returns
    -------
    `numpy.ndarray`
        The (N, N_m) matrix of derivatives, computed by exact monomial
        calculus.
    """
    points = np.asarray(points, dtype=float)
    exponents = spec.exponents
    powers = _power_table(points, spec.degree)
    result = np.ones((points.shape[0], exponents.shape[0]))
    for j, order in enumerate(orders):
        alpha = exponents[:, j]
        if order == 0:
            result *= powers[:, j, alpha]
            continue
        # Falling factorial alpha (alpha - 1) ... (alpha - order + 1); it
        # vanishes exactly when alpha < order.
        factor = np.ones(alpha.shape, dtype=float)
        for step in range(order):
            factor *= alpha - step
        result *= factor * powers[:, j, np.maximum(alpha - order, 0)]
    return result


def _power_table(points: np.ndarray, degree: int) -> np.ndarray:
    # powers[l, j, p] = x_{l,j} ** p, accumulated by repeated multiplication.
    powers = np.empty(points.shape + (degree + 1,))
    powers[:, :, 0] = 1.0
    for p in range(1, degree + 1):
        powers[:, :, p] = powers[:, :, p - 1] * points
    return powers


@functools.lru_cache(maxsize=None)
def _compositions(d: int, total: int) -> tuple[tuple[int, ...], ...]:
    # Ascending first exponent, then the remaining ones recursively.
    if d == 1:
        return ((total,),)
    return tuple(
        (first,) + rest
        for first in range(total + 1)
        for rest in _compositions(d - 1, total - first)
    )


def _check_dim_degree(d: int, m: int) -> None:
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}.")
    if m < 0:
        raise ValueError(f"degree must be nonnegative, got {m}.")


def _single_point(spec: BasisSpec, x: Sequence[float]) -> np.ndarray:
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.ndim != 1:
        raise fit_exceptions.DimensionMismatchError(spec.dim, point.ndim)
    if point.shape[0] != spec.dim:
        raise fit_exceptions.DimensionMismatchError(spec.dim, point.shape[0])
    return point[np.newaxis, :]


def _as_points(spec: BasisSpec, points: np.ndarray) -> np.ndarray:
    array = np.asarray(points, dtype=float)
    if array.ndim == 1 and spec.dim == 1:
        array = array[:, np.newaxis]
    if array.ndim != 2:
        raise fit_exceptions.DimensionMismatchError(spec.dim, array.ndim)
    if array.shape[0] == 0:
        raise ValueError("at least one point is required.")
    if array.shape[1] != spec.dim:
        raise fit_exceptions.DimensionMismatchError(spec.dim, array.shape[1])
    return array


@dataclasses.dataclass(frozen=True)
class MonomialSum:
    """A polynomial stored as nonzero coefficients over explicit exponents.

    It is the form in which derivatives of a model are evaluated repeatedly,
    e.g. by the lower-level searches.
    """

    exponents: np.ndarray
    coefficients: np.ndarray

    @classmethod
    def derivative_of(
        cls, spec: BasisSpec, coefficients: np.ndarray, orders: Sequence[int]
    ) -> "MonomialSum":
        """Differentiate w^T phi(x) `orders[j]` times in every direction j."""
        exponents = spec.exponents.astype(np.int64)
        weights = np.asarray(coefficients, dtype=float).copy()
        for j, order in enumerate(orders):
            for _ in range(order):
                weights = weights * exponents[:, j]
                exponents[:, j] = np.maximum(exponents[:, j] - 1, 0)
        keep = weights != 0.0
        return cls(exponents=exponents[keep], coefficients=weights[keep])

    @property
    def dim(self) -> int:
        """int: The number of variables."""
        return self.exponents.shape[1]

    def value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """Return the value and the gradient at one point."""
        point = np.asarray(x, dtype=float)
        gradient = np.zeros(point.shape[0])
        if self.coefficients.size == 0:
            return 0.0, gradient
        degree = int(self.exponents.max(initial=0))
        powers = _power_table(point[np.newaxis, :], degree)[0]
        columns = np.arange(point.shape[0])
        factors = powers[columns, self.exponents]
        value = float(self.coefficients @ np.prod(factors, axis=1))
        for k in columns:
            alpha = self.exponents[:, k]
            lowered = factors.copy()
            lowered[:, k] = alpha * powers[k, np.maximum(alpha - 1, 0)]
            gradient[k] = self.coefficients @ np.prod(lowered, axis=1)
        return value, gradient
