# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Shape-constrained Fitting Exception Definitions."""

from typing import Any, Optional


class ShapeFitError(Exception):
    """Base class of all shapefit errors."""


class DimensionMismatchError(ShapeFitError, ValueError):
    """Raised when points, grids or models disagree in dimension."""

    def __init__(self, expected: int, actual: int) -> None:
        Exception.__init__(
            self, f"expected dimension {expected}, but got dimension {actual}."
        )
        self.expected = expected
        self.actual = actual


class InvalidConstraintError(ShapeFitError, ValueError):
    """Raised when a shape constraint entry cannot be used."""

    def __init__(self, reason: str) -> None:
        Exception.__init__(self, f"invalid shape constraint: {reason}")


class DegenerateRangeError(ShapeFitError, ValueError):
    """Raised when a constrained direction has zero input range."""

    def __init__(self, direction: int) -> None:
        Exception.__init__(
            self, f"input direction x{direction + 1} has zero range in the data."
        )
        self.direction = direction


class InfeasibleError(ShapeFitError):
    """Raised when no point satisfies the constraints of a quadratic program."""

    def __init__(self, num_constraints: int) -> None:
        Exception.__init__(
            self, f"the {num_constraints} linear constraints are inconsistent."
        )


class NotPositiveDefiniteError(ShapeFitError):
    """Raised when a Hessian or kernel matrix fails its Cholesky factorization."""

    def __init__(self, what: str = "matrix") -> None:
        Exception.__init__(self, f"{what} is not positive definite.")


class MaxIterationsError(ShapeFitError):
    """Raised when an iterative method exhausts its iteration budget.

    The best-so-far result of the failed computation is attached as
    ``model`` and ``report`` when the raiser has one.
    """

    def __init__(
        self,
        limit: int,
        what: str = "solver",
        model: Optional[Any] = None,
        report: Optional[Any] = None,
    ) -> None:
        Exception.__init__(self, f"{what} did not converge within {limit} iterations.")
        self.limit = limit
        self.model = model
        self.report = report


class NonFiniteObjectiveError(ShapeFitError):
    """Raised when an objective function evaluates to inf or nan."""

    def __init__(self, point: Any) -> None:
        Exception.__init__(self, f"objective is not finite at {point}.")


class DatasetError(ShapeFitError):
    """Raised when a data file cannot be parsed."""

    def __init__(self, path: str, reason: str) -> None:
        Exception.__init__(self, f"{path}: {reason}")


class ModelFormatError(ShapeFitError):
    """Raised when a model or grid document is malformed or of another version."""

    def __init__(self, path: str, reason: str) -> None:
        Exception.__init__(self, f"{path}: {reason}")
