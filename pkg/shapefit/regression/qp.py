# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Strictly convex quadratic programs with linear inequality constraints.

A program is stated as::

    minimize    1/2 w^T G w - a^T w
    subject to  C^T w >= b

and solved with the dual active-set method of Goldfarb and Idnani as
implemented by `quadprog`.
"""

import dataclasses
import logging

import numpy as np
import quadprog
import scipy.linalg

from typing import Optional

from shapefit import fit_exceptions


logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
"""Relative tolerance of the Hessian symmetry check."""


@dataclasses.dataclass(frozen=True)
class QuadraticProgram:
    """A strictly convex QP in the Goldfarb-Idnani form.

    Attributes
    ----------
    hessian: `numpy.ndarray`
        The symmetric positive definite (n, n) matrix G.
    linear: `numpy.ndarray`
        The n-vector a of the objective 1/2 w^T G w - a^T w.
    constraints: `numpy.ndarray`
        The (n, p) matrix C whose columns are the constraint normals.
    bounds: `numpy.ndarray`
        The p-vector b of the constraints C^T w >= b.

    Raises
    ------
    `ValueError`
        If the shapes disagree or G is not symmetric.
    `NotPositiveDefiniteError`
        If the Cholesky factorization of G fails.
    """

    hessian: np.ndarray
    linear: np.ndarray
    constraints: np.ndarray
    bounds: np.ndarray

    def __post_init__(self) -> None:
        hessian = np.array(self.hessian, dtype=float)
        linear = np.array(self.linear, dtype=float).ravel()
        n = linear.shape[0]
        constraints = np.array(self.constraints, dtype=float).reshape(n, -1)
        bounds = np.array(self.bounds, dtype=float).ravel()
        if hessian.shape != (n, n):
            raise ValueError(f"hessian of shape {hessian.shape} does not fit n={n}.")
        if constraints.shape[1] != bounds.shape[0]:
            raise ValueError(
                f"{constraints.shape[1]} constraint columns but "
                f"{bounds.shape[0]} bounds."
            )
        scale = max(1.0, float(np.abs(hessian).max(initial=0.0)))
        if np.abs(hessian - hessian.T).max(initial=0.0) > SYMMETRY_TOLERANCE * scale:
            raise ValueError("hessian is not symmetric.")
        try:
            scipy.linalg.cholesky(hessian, lower=False)
        except np.linalg.LinAlgError as error:
            raise fit_exceptions.NotPositiveDefiniteError("hessian") from error
        object.__setattr__(self, "hessian", hessian)
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_variables(self) -> int:
        """int: The number n of unknowns."""
        return self.linear.shape[0]

    @property
    def num_constraints(self) -> int:
        """int: The number p of inequality constraints."""
        return self.bounds.shape[0]

    def objective(self, w: np.ndarray) -> float:
        """Return 1/2 w^T G w - a^T w."""
        return float(0.5 * w @ self.hessian @ w - self.linear @ w)


@dataclasses.dataclass(frozen=True)
class QpSolution:
    """The minimizer of a `QuadraticProgram` with its certificate.

    Attributes
    ----------
    w: `numpy.ndarray`
        The minimizer.
    active_set: `tuple[int, ...]`
        The 0-based indices of the constraints active at `w`, ascending.
    multipliers: `numpy.ndarray`
        The p Lagrange multipliers, zero outside the active set.
    objective: `float`
        The optimal objective value.
    iterations: `int`
        The number of active-set changes.
    """

    w: np.ndarray
    active_set: tuple[int, ...]
    multipliers: np.ndarray
    objective: float
    iterations: int


def solve_qp(qp: QuadraticProgram, max_iterations: Optional[int] = None) -> QpSolution:
    """Return the unique global minimizer of a strictly convex QP.

    Parameters
    ----------
    qp: `QuadraticProgram`
        The program to solve.
    max_iterations: `Optional[int]`
        The allowed number of active-set changes; 50 (n + p) by default.

    Returns
    -------
    `QpSolution`
        The minimizer with its active set and multipliers.

    Raises
    ------
    `InfeasibleError`
        If no point satisfies C^T w >= b.
    `NotPositiveDefiniteError`
        If the solver's own factorization of G fails.
    `MaxIterationsError`
        If the solver needed more active-set changes than allowed.

    Examples
    --------
    >>> program = QuadraticProgram(
    ...     hessian=np.eye(2), linear=np.zeros(2),
    ...     constraints=np.array([[1.0], [0.0]]), bounds=np.array([1.0]))
    >>> solution = solve_qp(program)
    >>> solution.w, solution.active_set
    (array([1., 0.]), (0,))
    """
    n, p = qp.num_variables, qp.num_constraints
    limit = max_iterations if max_iterations is not None else 50 * (n + p)

    if p == 0:
        w = scipy.linalg.cho_solve(scipy.linalg.cho_factor(qp.hessian), qp.linear)
        return QpSolution(
            w=w,
            active_set=(),
            multipliers=np.zeros(0),
            objective=qp.objective(w),
            iterations=0,
        )

    try:
        w, objective, _, counts, multipliers, active = quadprog.solve_qp(
            qp.hessian.copy(),
            qp.linear.copy(),
            np.ascontiguousarray(qp.constraints),
            qp.bounds.copy(),
            0,
        )
    except ValueError as error:
        message = str(error)
        if "inconsistent" in message:
            raise fit_exceptions.InfeasibleError(p) from error
        if "positive definite" in message:
            raise fit_exceptions.NotPositiveDefiniteError("hessian") from error
        raise

    iterations = int(counts[0])
    if iterations > limit:
        raise fit_exceptions.MaxIterationsError(limit, what="active-set solver")

    active_set = tuple(sorted(int(index) - 1 for index in active if index > 0))
    logger.debug(
        "QP with n=%d, p=%d solved in %d iterations, %d active",
        n,
        p,
        iterations,
        len(active_set),
    )
    return QpSolution(
        w=np.asarray(w, dtype=float),
        active_set=active_set,
        multipliers=np.asarray(multipliers, dtype=float),
        objective=float(objective),
        iterations=iterations,
    )


def kkt_residuals(qp: QuadraticProgram, solution: QpSolution) -> tuple[float, float]:
    """Return the (infeasibility, stationarity) residuals of a solution.

    Infeasibility is the largest violation max(b - C^T w, 0); stationarity is
    the infinity norm of G w - a - C lambda.
    """
    if qp.num_constraints == 0:
        slack = np.zeros(0)
        gradient = qp.hessian @ solution.w - qp.linear
    else:
        slack = qp.constraints.T @ solution.w - qp.bounds
        gradient = (
            qp.hessian @ solution.w - qp.linear - qp.constraints @ solution.multipliers
        )
    infeasibility = float(np.maximum(-slack, 0.0).max(initial=0.0))
    return infeasibility, float(np.abs(gradient).max(initial=0.0))
