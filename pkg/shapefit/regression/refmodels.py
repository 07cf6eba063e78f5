# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Unconstrained reference predictors.

Polynomial least squares (minimum norm), ridge regression and Gaussian-process
regression with a multi-length-scale RBF kernel. All of them work in the
scaled coordinates `siamor` uses: inputs on the unit box, targets centered and
of unit range.
"""

import dataclasses
import logging

import numpy as np
import scipy.linalg

from typing import Optional, Sequence

from shapefit import dataset as data
from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import basis as polynomials
from shapefit.regression import globalopt
from shapefit.regression import siamor


logger = logging.getLogger(__name__)

RANK_CUTOFF = 1e-10
"""Singular values below this fraction of the largest one are dropped."""

DEFAULT_NOISE = 1e-5
"""Noise level of the GPR kernel matrix, in scaled target units."""

LENGTHSCALE_BOUNDS = (0.05, 10.0)
"""Search interval of every RBF length scale, scaled input units."""

LOG_SIGNAL_VARIANCE_BOUNDS = (-4.0, 4.0)
"""Search interval of log s^2."""

GPR_RESTARTS = 32
"""Multistart points of the hyperparameter search."""

FAILED_LIKELIHOOD = 1e10
"""Negative log likelihood reported where the kernel matrix cannot be factored."""


def fit_unconstrained_poly(dataset: data.Dataset, degree: int) -> siamor.PolynomialModel:
    """Return the minimum-norm least-squares polynomial of total degree `degree`.

    The solution is computed with an SVD; singular values below
    `RANK_CUTOFF` times the largest one are treated as zero, which picks the
    minimum-norm solution when there are more terms than data points.
    """
    basis, design, scaled, input_scaling, target_scaling = _prepare(dataset, degree)
    coefficients = _least_squares(design, scaled.targets)
    return siamor.PolynomialModel(basis, coefficients, input_scaling, target_scaling)


def ridge_coefficients(design: np.ndarray, targets: np.ndarray, lam: float) -> np.ndarray:
    """Minimize 1/2 ||Phi w - t||^2 + lam ||w||^2.

    Parameters
    ----------
    design: `numpy.ndarray`
        The (N, N_m) design matrix Phi.
    targets: `numpy.ndarray`
        The N targets t.
    lam: `float`
        The nonnegative penalty weight; 0 gives the minimum-norm
        least-squares solution.

    Returns
    -------
    `numpy.ndarray`
        The solution of (Phi^T Phi + 2 lam I) w = Phi^T t.

    Examples
    --------
    >>> ridge_coefficients(np.ones((1, 1)), np.ones(1), 0.5)
    array([0.5])
    """
    if lam < 0.0:
        raise ValueError(f"ridge penalty must be nonnegative, got {lam}.")
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if lam == 0.0:
        return _least_squares(design, targets)
    normal = design.T @ design + 2.0 * lam * np.eye(design.shape[1])
    return scipy.linalg.solve(normal, design.T @ targets, assume_a="pos")


def fit_ridge_poly(
    dataset: data.Dataset, degree: int, lam: float
) -> siamor.PolynomialModel:
    """Return the ridge-regularized polynomial fit, penalty on scaled data."""
    basis, design, scaled, input_scaling, target_scaling = _prepare(dataset, degree)
    coefficients = ridge_coefficients(design, scaled.targets, lam)
    return siamor.PolynomialModel(basis, coefficients, input_scaling, target_scaling)


@dataclasses.dataclass(frozen=True)
class GprModel:
    """A Gaussian-process posterior mean with RBF kernel.

    Attributes
    ----------
    inputs: `numpy.ndarray`
        The scaled (N, d) training inputs.
    lengthscales: `numpy.ndarray`
        The length scale of every direction, scaled units.
    signal_variance: `float`
        The kernel amplitude s^2.
    noise: `float`
        The diagonal added to the kernel matrix.
    cholesky: `numpy.ndarray`
        The lower Cholesky factor of K + noise I.
    weights: `numpy.ndarray`
        The dual weights alpha = (K + noise I)^-1 t.
    input_scaling: `AffineScaling`
        Maps raw inputs onto scaled inputs.
    target_scaling: `AffineScaling`
        Maps raw targets onto scaled targets.
    """

    inputs: np.ndarray
    lengthscales: np.ndarray
    signal_variance: float
    noise: float
    cholesky: np.ndarray
    weights: np.ndarray
    input_scaling: data.AffineScaling
    target_scaling: data.AffineScaling

    @property
    def dim(self) -> int:
        """int: The input dimension d."""
        return self.inputs.shape[1]

    def predict(self, points: np.ndarray) -> np.ndarray:
        """Return the raw-unit posterior mean at raw-unit points."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, np.newaxis] if self.dim == 1 else points[np.newaxis, :]
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise fit_exceptions.DimensionMismatchError(self.dim, points.shape[-1])
        scaled = self.input_scaling.forward(points)
        kernel = rbf_kernel(scaled, self.inputs, self.lengthscales, self.signal_variance)
        return self.target_scaling.inverse(kernel @ self.weights)

    def log_likelihood(self, targets: np.ndarray) -> float:
        """Return the log marginal likelihood of scaled targets."""
        alpha = self.weights
        return float(
            -0.5 * np.asarray(targets) @ alpha
            - np.log(np.diag(self.cholesky)).sum()
            - 0.5 * alpha.shape[0] * np.log(2.0 * np.pi)
        )


def rbf_kernel(
    a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray, signal_variance: float
) -> np.ndarray:
    """Return s^2 exp(-1/2 sum_j (a_j - b_j)^2 / l_j^2) for all pairs of rows."""
    distances = _squared_distances(a, b, lengthscales).sum(axis=0)
    return signal_variance * np.exp(-0.5 * distances)


def negative_log_likelihood(
    parameters: np.ndarray, inputs: np.ndarray, targets: np.ndarray, noise: float
) -> tuple[float, np.ndarray]:
    """Return the negative log marginal likelihood and its gradient.

    Parameters
    ----------
    parameters: `numpy.ndarray`
        (log l_1, ..., log l_d, log s^2).
    inputs: `numpy.ndarray`
        The scaled (N, d) training inputs.
    targets: `numpy.ndarray`
        The scaled targets.
    noise: `float`
        The fixed noise level.

    Returns
    -------
    `tuple[float, numpy.ndarray]`
        The value and the gradient with respect to `parameters`. Where
        K + noise I is not positive definite the value is
        `FAILED_LIKELIHOOD` and the gradient zero.
    """
    dim = inputs.shape[1]
    lengthscales = np.exp(parameters[:dim])
    signal_variance = float(np.exp(parameters[dim]))
    scaled_distances = _squared_distances(inputs, inputs, lengthscales)
    signal = signal_variance * np.exp(-0.5 * scaled_distances.sum(axis=0))
    matrix = signal + noise * np.eye(inputs.shape[0])
    try:
        factor = scipy.linalg.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError:
        return FAILED_LIKELIHOOD, np.zeros(parameters.shape[0])
    alpha = scipy.linalg.cho_solve(factor, targets)
    value = (
        0.5 * targets @ alpha
        + np.log(np.diag(factor[0])).sum()
        + 0.5 * targets.shape[0] * np.log(2.0 * np.pi)
    )
    inverse = scipy.linalg.cho_solve(factor, np.eye(inputs.shape[0]))
    outer = np.outer(alpha, alpha) - inverse
    gradient = np.empty(parameters.shape[0])
    for j in range(dim):
        gradient[j] = -0.5 * np.sum(outer * signal * scaled_distances[j])
    gradient[dim] = -0.5 * np.sum(outer * signal)
    return float(value), gradient


def gpr_fit(
    dataset: data.Dataset,
    noise: float = DEFAULT_NOISE,
    lengthscales: Optional[Sequence[float]] = None,
    signal_variance: Optional[float] = None,
    restarts: int = GPR_RESTARTS,
    registry: Optional[metrics.MetricRegistry] = None,
) -> GprModel:
    """Fit a GPR posterior mean, optimizing missing hyperparameters.

    Hyperparameters left as `None` maximize the log marginal likelihood over
    log l_j in [log 0.05, log 10] and log s^2 in [-4, 4], searched with
    `globalopt.minimize_box`.

    Raises
    ------
    `NotPositiveDefiniteError`
        If the final kernel matrix cannot be factored.
    """
    if noise <= 0.0:
        raise ValueError(f"noise must be positive, got {noise}.")
    input_scaling = data.AffineScaling.for_inputs(dataset.inputs)
    target_scaling = data.AffineScaling.for_targets(dataset.targets)
    scaled = data.scale_dataset(dataset, input_scaling, target_scaling)
    dim = dataset.dim

    lower = np.append(
        np.full(dim, np.log(LENGTHSCALE_BOUNDS[0])), LOG_SIGNAL_VARIANCE_BOUNDS[0]
    )
    upper = np.append(
        np.full(dim, np.log(LENGTHSCALE_BOUNDS[1])), LOG_SIGNAL_VARIANCE_BOUNDS[1]
    )
    # Fixed hyperparameters become zero-width directions of the search box.
    if lengthscales is not None:
        fixed = np.log(np.asarray(lengthscales, dtype=float))
        if fixed.shape != (dim,):
            raise fit_exceptions.DimensionMismatchError(dim, fixed.shape[0])
        lower[:dim] = upper[:dim] = fixed
    if signal_variance is not None:
        if signal_variance <= 0.0:
            raise ValueError(f"signal variance must be positive, got {signal_variance}.")
        lower[dim] = upper[dim] = np.log(signal_variance)

    def objective(parameters: np.ndarray) -> tuple[float, np.ndarray]:
        return negative_log_likelihood(parameters, scaled.inputs, scaled.targets, noise)

    result = globalopt.minimize_box(
        objective, globalopt.Box(lower, upper), restarts=restarts, registry=registry
    )
    best_lengthscales = np.exp(result.argmin[:dim])
    best_variance = float(np.exp(result.argmin[dim]))
    logger.debug(
        "GPR hyperparameters: length scales %s, signal variance %.4g, NLML %.6g",
        best_lengthscales,
        best_variance,
        result.value,
    )

    matrix = rbf_kernel(
        scaled.inputs, scaled.inputs, best_lengthscales, best_variance
    ) + noise * np.eye(dataset.size)
    try:
        cholesky = scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError as error:
        raise fit_exceptions.NotPositiveDefiniteError("kernel matrix") from error
    weights = scipy.linalg.cho_solve((cholesky, True), scaled.targets)
    return GprModel(
        inputs=scaled.inputs,
        lengthscales=best_lengthscales,
        signal_variance=best_variance,
        noise=noise,
        cholesky=cholesky,
        weights=weights,
        input_scaling=input_scaling,
        target_scaling=target_scaling,
    )


def gpr_predict(model: GprModel, x: Sequence[float]) -> float:
    """Return the raw-unit posterior mean at one raw-unit point."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (model.dim,):
        raise fit_exceptions.DimensionMismatchError(model.dim, point.shape[-1])
    return float(model.predict(point[np.newaxis, :])[0])


def _prepare(dataset: data.Dataset, degree: int) -> tuple[
    polynomials.BasisSpec,
    np.ndarray,
    data.Dataset,
    data.AffineScaling,
    data.AffineScaling,
]:
    input_scaling = data.AffineScaling.for_inputs(dataset.inputs)
    target_scaling = data.AffineScaling.for_targets(dataset.targets)
    scaled = data.scale_dataset(dataset, input_scaling, target_scaling)
    basis = polynomials.BasisSpec(dim=dataset.dim, degree=degree)
    design = polynomials.design_matrix(basis, scaled.inputs)
    return basis, design, scaled, input_scaling, target_scaling


def _least_squares(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    coefficients, _, rank, _ = scipy.linalg.lstsq(
        design, targets, cond=RANK_CUTOFF, lapack_driver="gelsd"
    )
    logger.debug("least squares with %d columns has rank %d", design.shape[1], rank)
    return coefficients


def _squared_distances(
    a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray
) -> np.ndarray:
    # result[j, k, l] = (a[k, j] - b[l, j])^2 / l_j^2
    differences = (a.T[:, :, np.newaxis] - b.T[:, np.newaxis, :]) / lengthscales[
        :, np.newaxis, np.newaxis
    ]
    return differences**2
