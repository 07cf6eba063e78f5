# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Shape-constrained polynomial regression by adaptive discretization.

Requiring a sign on a derivative of the model everywhere in the input box is
a semi-infinite constraint: finitely many coefficients, one constraint per
point of the box. `fit` replaces the box by finite point sets that grow from
iteration to iteration:

1. Start from a coarse tensor grid of constraint points per entry.
2. Solve the least-squares problem restricted to the current points, a
   strictly convex QP.
3. For every entry, search the box for the worst violation of the current
   model. Points with a violation beyond the tolerance are added.
4. If the searches add nothing, scan a fine reference grid. The fit has
   converged once the grid shows no violation beyond the tolerance;
   otherwise the worst grid points are added and the loop continues.

All computation happens in scaled coordinates: inputs are mapped onto the unit
box and targets are centered and scaled to unit range.
"""

import concurrent.futures
import dataclasses
import enum
import logging

import numpy as np

from typing import Iterator, Optional, Sequence

from shapefit import dataset as data
from shapefit import fit_exceptions
from shapefit import metrics
from shapefit.regression import basis as polynomials
from shapefit.regression import globalopt
from shapefit.regression import grids
from shapefit.regression import qp


logger = logging.getLogger(__name__)

TOLERANCE_FRACTION = 0.01
"""Permitted violation as a fraction of the target range per input range."""

PREDICT_CHUNK = 8192
"""Number of points evaluated at once by `PolynomialModel.predict`."""


@dataclasses.dataclass(frozen=True)
class ConstraintEntry:
    """A sign requirement on one pure partial derivative.

    Attributes
    ----------
    direction: `int`
        The 0-based input direction j.
    order: `int`
        The derivative order, 1 (monotonicity) or 2 (convexity/concavity).
    sign: `int`
        +1 requires the derivative to be nonnegative, -1 nonpositive.
    """

    direction: int
    order: int = 1
    sign: int = 1

    def __post_init__(self) -> None:
        if self.direction < 0:
            raise fit_exceptions.InvalidConstraintError(
                f"direction {self.direction} is negative"
            )
        if self.order not in (1, 2):
            raise fit_exceptions.InvalidConstraintError(
                f"derivative order must be 1 or 2, got {self.order}"
            )
        if self.sign not in (1, -1):
            raise fit_exceptions.InvalidConstraintError(
                f"sign must be +1 or -1, got {self.sign}"
            )

    @property
    def label(self) -> str:
        """str: A short readable name, e.g. ``increasing x1``."""
        if self.order == 1:
            kind = "increasing" if self.sign > 0 else "decreasing"
        else:
            kind = "convex" if self.sign > 0 else "concave"
        return f"{kind} x{self.direction + 1}"

    def derivative_orders(self, dim: int) -> tuple[int, ...]:
        """Return the per-direction derivative orders of this entry."""
        orders = [0] * dim
        orders[self.direction] = self.order
        return tuple(orders)


@dataclasses.dataclass(frozen=True)
class ShapeConstraintSpec:
    """The set of shape requirements of one fit.

    At most one entry per (direction, order) pair is allowed. Order-1 entries
    form the monotonicity signature.
    """

    entries: tuple[ConstraintEntry, ...] = ()

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        seen: set[tuple[int, int]] = set()
        for entry in entries:
            key = (entry.direction, entry.order)
            if key in seen:
                raise fit_exceptions.InvalidConstraintError(
                    f"two entries of order {entry.order} "
                    f"for direction x{entry.direction + 1}"
                )
            seen.add(key)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_signature(
        cls,
        signature: Sequence[int],
        concave: Sequence[int] = (),
        convex: Sequence[int] = (),
    ) -> "ShapeConstraintSpec":
        """Build a spec from a monotonicity signature.

        Parameters
        ----------
        signature: `Sequence[int]`
            One value in {-1, 0, +1} per direction; 0 leaves it unconstrained.
        concave: `Sequence[int]`
            0-based directions that must be concave.
        convex: `Sequence[int]`
            0-based directions that must be convex.

        Examples
        --------
        >>> [e.label for e in ShapeConstraintSpec.from_signature([1, -1, 0]).entries]
        ['increasing x1', 'decreasing x2']
        """
        entries = []
        for direction, sign in enumerate(signature):
            if sign not in (-1, 0, 1):
                raise fit_exceptions.InvalidConstraintError(
                    f"signature values must be -1, 0 or +1, got {sign}"
                )
            if sign != 0:
                entries.append(ConstraintEntry(direction, order=1, sign=sign))
        entries += [ConstraintEntry(j, order=2, sign=-1) for j in concave]
        entries += [ConstraintEntry(j, order=2, sign=1) for j in convex]
        return cls(entries=tuple(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ConstraintEntry]:
        return iter(self.entries)

    @property
    def monotone_entries(self) -> tuple[ConstraintEntry, ...]:
        """tuple[ConstraintEntry, ...]: The order-1 entries."""
        return tuple(entry for entry in self.entries if entry.order == 1)

    def validate_dim(self, dim: int) -> None:
        """Raise `InvalidConstraintError` if an entry lies outside ``dim``."""
        for entry in self.entries:
            if entry.direction >= dim:
                raise fit_exceptions.InvalidConstraintError(
                    f"direction x{entry.direction + 1} does not exist "
                    f"in {dim}-dimensional data"
                )


@dataclasses.dataclass(frozen=True)
class PolynomialModel:
    """A fitted polynomial y(x) = w^T phi(u(x)) with its scalings.

    Attributes
    ----------
    basis: `BasisSpec`
        The monomial basis.
    coefficients: `numpy.ndarray`
        The coefficient vector w, in scaled coordinates.
    input_scaling: `AffineScaling`
        Maps raw inputs x onto scaled inputs u.
    target_scaling: `AffineScaling`
        Maps raw targets onto scaled targets.
    """

    basis: polynomials.BasisSpec
    coefficients: np.ndarray
    input_scaling: data.AffineScaling
    target_scaling: data.AffineScaling

    def __post_init__(self) -> None:
        coefficients = np.array(self.coefficients, dtype=float).ravel()
        if coefficients.shape[0] != self.basis.num_terms:
            raise ValueError(
                f"{coefficients.shape[0]} coefficients for a basis "
                f"of {self.basis.num_terms} terms."
            )
        if self.input_scaling.offset.shape[0] != self.basis.dim:
            raise fit_exceptions.DimensionMismatchError(
                self.basis.dim, self.input_scaling.offset.shape[0]
            )
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def dim(self) -> int:
        """int: The input dimension d."""
        return self.basis.dim

    def predict(self, points: np.ndarray) -> np.ndarray:
        """Return the raw-unit predictions at raw-unit points."""
        scaled = self.input_scaling.forward(self._as_matrix(points))
        return self.target_scaling.inverse(self.predict_scaled(scaled))

    def predict_scaled(self, points: np.ndarray) -> np.ndarray:
        """Return scaled predictions at points given in scaled coordinates."""
        return self._evaluate(points, self.basis.dim * (0,))

    def derivative(self, points: np.ndarray, direction: int, order: int) -> np.ndarray:
        """Return d^order y / dx_j^order at raw-unit points, in raw units."""
        scaled = self.input_scaling.forward(self._as_matrix(points))
        values = self.derivative_scaled(scaled, direction, order)
        factor = (
            self.target_scaling.scale[0]
            / self.input_scaling.scale[direction] ** order
        )
        return factor * values

    def derivative_scaled(
        self, points: np.ndarray, direction: int, order: int
    ) -> np.ndarray:
        """Return a pure partial derivative in scaled coordinates."""
        if not 0 <= direction < self.dim:
            raise ValueError(f"direction {direction} is outside 0..{self.dim - 1}.")
        if order not in (1, 2):
            raise ValueError(f"derivative order must be 1 or 2, got {order}.")
        orders = [0] * self.dim
        orders[direction] = order
        return self._evaluate(points, tuple(orders))

    def _evaluate(self, points: np.ndarray, orders: tuple[int, ...]) -> np.ndarray:
        points = self._as_matrix(points)
        values = np.empty(points.shape[0])
        for start in range(0, points.shape[0], PREDICT_CHUNK):
            chunk = points[start : start + PREDICT_CHUNK]
            values[start : start + chunk.shape[0]] = (
                polynomials.derivative_matrix(self.basis, chunk, orders)
                @ self.coefficients
            )
        return values

    def _as_matrix(self, points: np.ndarray) -> np.ndarray:
        array = np.asarray(points, dtype=float)
        if array.ndim == 1:
            array = (
                array[:, np.newaxis] if self.dim == 1 else array[np.newaxis, :]
            )
        if array.ndim != 2 or array.shape[1] != self.dim:
            raise fit_exceptions.DimensionMismatchError(self.dim, array.shape[-1])
        return array


class Provenance(enum.Enum):
    """Where a discretization point came from."""

    INITIAL_GRID = "initial-grid"
    ADAPTIVE = "adaptive"
    REFERENCE_GRID = "reference-grid"


class DiscretizationState:
    """The finite constraint point sets, one per constraint entry.

    Points are stored in scaled coordinates and the sets only grow.
    """

    def __init__(
        self,
        entries: Sequence[ConstraintEntry],
        dim: int,
        duplicate_tolerance: float = 1e-10,
    ) -> None:
        self.entries = tuple(entries)
        self.dim = dim
        self.duplicate_tolerance = duplicate_tolerance
        self._points: dict[ConstraintEntry, list[np.ndarray]] = {
            entry: [] for entry in self.entries
        }
        self._provenance: dict[ConstraintEntry, list[Provenance]] = {
            entry: [] for entry in self.entries
        }

    @classmethod
    def initial(
        cls,
        spec: ShapeConstraintSpec,
        dim: int,
        resolution: int,
        duplicate_tolerance: float = 1e-10,
    ) -> "DiscretizationState":
        """Return the state holding a tensor grid for every entry."""
        state = cls(spec.entries, dim, duplicate_tolerance)
        points = grids.tensor_points(grids.unit_axes(dim, resolution))
        for entry in state.entries:
            for point in points:
                state.add(entry, point, Provenance.INITIAL_GRID)
        return state

    def is_new(self, entry: ConstraintEntry, point: np.ndarray) -> bool:
        """Return `False` if `point` duplicates a point of the entry's set."""
        known = self._points[entry]
        if not known:
            return True
        distances = np.abs(np.asarray(known) - point).max(axis=1)
        return bool(distances.min() > self.duplicate_tolerance)

    def add(
        self, entry: ConstraintEntry, point: np.ndarray, provenance: Provenance
    ) -> bool:
        """Add a point to an entry's set unless it is a duplicate.

        The point is clipped into the unit box.

        Returns
        -------
        `bool`
            `True` if the point was added.
        """
        point = np.clip(np.asarray(point, dtype=float).ravel(), 0.0, 1.0)
        if point.shape[0] != self.dim:
            raise fit_exceptions.DimensionMismatchError(self.dim, point.shape[0])
        if not self.is_new(entry, point):
            return False
        point.setflags(write=False)
        self._points[entry].append(point)
        self._provenance[entry].append(provenance)
        return True

    def points(self, entry: ConstraintEntry) -> np.ndarray:
        """Return the (k, d) points of an entry in insertion order."""
        known = self._points[entry]
        if not known:
            return np.empty((0, self.dim))
        return np.asarray(known)

    def provenance(self, entry: ConstraintEntry) -> tuple[Provenance, ...]:
        """Return the provenance tags of an entry's points."""
        return tuple(self._provenance[entry])

    @property
    def total(self) -> int:
        """int: The number of constraint points over all entries."""
        return sum(len(points) for points in self._points.values())

    def count(
        self, provenance: Provenance, entry: Optional[ConstraintEntry] = None
    ) -> int:
        """Return how many points of the given provenance exist."""
        entries = self.entries if entry is None else (entry,)
        return sum(
            tag == provenance for e in entries for tag in self._provenance[e]
        )


@dataclasses.dataclass(frozen=True)
class FitOptions:
    """Tunable parameters of `fit`.

    Attributes
    ----------
    initial_grid: `Optional[int]`
        Points per dimension of the initial grid; 5 for d <= 2, else 4.
    reference_grid: `int`
        Points per dimension of the reference grid.
    restarts: `Optional[int]`
        Multistart points per lower-level search; 100 d by default.
    max_iterations: `int`
        The cap on outer iterations.
    epsilon: `Optional[tuple[float, ...]]`
        Raw-unit tolerances overriding the default, one per entry.
    jitter: `float`
        Relative Hessian regularization.
    duplicate_tolerance: `float`
        Scaled distance under which two constraint points are the same.
    workers: `int`
        Threads running the per-entry lower-level searches.
    """

    initial_grid: Optional[int] = None
    reference_grid: int = 20
    restarts: Optional[int] = None
    max_iterations: int = 500
    epsilon: Optional[tuple[float, ...]] = None
    jitter: float = 1e-8
    duplicate_tolerance: float = 1e-10
    workers: int = 1

    def __post_init__(self) -> None:
        if self.initial_grid is not None and self.initial_grid < 2:
            raise ValueError(
                f"initial grid resolution must be at least 2, got {self.initial_grid}."
            )
        if self.reference_grid < 2:
            raise ValueError(
                "reference grid resolution must be at least 2, "
                f"got {self.reference_grid}."
            )
        if self.restarts is not None and self.restarts < 1:
            raise ValueError(f"restarts must be positive, got {self.restarts}.")
        if self.max_iterations < 0:
            raise ValueError(
                f"iteration cap must be nonnegative, got {self.max_iterations}."
            )
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}.")
        if self.epsilon is not None:
            object.__setattr__(self, "epsilon", tuple(float(e) for e in self.epsilon))
            if any(e < 0.0 for e in self.epsilon):
                raise ValueError("tolerances must be nonnegative.")

    def initial_resolution(self, dim: int) -> int:
        """Return the initial grid resolution used for dimension `dim`."""
        if self.initial_grid is not None:
            return self.initial_grid
        return 5 if dim <= 2 else 4


class FitStatus(enum.Enum):
    """Outcome of `fit`."""

    CONVERGED = "converged"
    MAX_ITERATIONS = "max-iterations"


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    """What happened in one outer iteration.

    Attributes
    ----------
    iteration: `int`
        The iteration index k, starting at 0.
    objective: `float`
        The optimal value of the k-th QP.
    constraints: `int`
        The number of constraint points in the k-th QP.
    worst_violations: `dict[str, float]`
        The smallest sign * derivative found per entry, scaled units.
    added: `tuple[str, ...]`
        The labels of the entries that received a point.
    stage: `str`
        ``lower-level``, ``reference-grid`` or ``converged``.
    """

    iteration: int
    objective: float
    constraints: int
    worst_violations: dict[str, float]
    added: tuple[str, ...]
    stage: str


@dataclasses.dataclass(frozen=True)
class FitReport:
    """Summary of a `fit` run.

    Attributes
    ----------
    iterations: `int`
        The index k of the final iteration.
    total_constraints: `int`
        The number of constraint points in the final QP.
    added_points: `dict[str, int]`
        The points added beyond the initial grid, per entry label.
    rmse: `float`
        The training RMSE in raw target units.
    status: `FitStatus`
        Whether the reference-grid check passed.
    history: `tuple[IterationRecord, ...]`
        One record per iteration.
    tolerances: `dict[str, float]`
        The raw-unit tolerance of each entry.
    """

    iterations: int
    total_constraints: int
    added_points: dict[str, int]
    rmse: float
    status: FitStatus
    history: tuple[IterationRecord, ...] = ()
    tolerances: dict[str, float] = dataclasses.field(default_factory=dict)

    def describe(self) -> str:
        """Return a one-line summary such as ``converged in iteration 11 ...``."""
        if self.status is FitStatus.CONVERGED:
            head = f"converged in iteration {self.iterations}"
        else:
            head = f"stopped without convergence in iteration {self.iterations}"
        return f"{head} with {self.total_constraints} final constraints"


@dataclasses.dataclass(frozen=True)
class Violation:
    """The worst point of one entry on the reference grid."""

    entry: ConstraintEntry
    point: np.ndarray
    value: float


def epsilon_tolerances(
    dataset: data.Dataset, spec: ShapeConstraintSpec
) -> dict[ConstraintEntry, float]:
    """Return the raw-unit violation tolerance of every entry.

    An order-k entry in direction j gets 0.01 (max t - min t) / (b_j - a_j)^k,
    where [a_j, b_j] is the range of the inputs in direction j.

    Raises
    ------
    `DegenerateRangeError`
        If a constrained direction has zero input range.

    Examples
    --------
    >>> points = data.Dataset(inputs=[0.0, 5.0], targets=[0.0, 10.0])
    >>> epsilon_tolerances(points, ShapeConstraintSpec.from_signature([1]))
    {ConstraintEntry(direction=0, order=1, sign=1): 0.02}
    """
    spec.validate_dim(dataset.dim)
    widths = _constrained_widths(dataset, spec)
    target_range = dataset.target_range
    return {
        entry: TOLERANCE_FRACTION * target_range / widths[entry.direction] ** entry.order
        for entry in spec.entries
    }


def assemble_upper_level(
    dataset: data.Dataset,
    spec: ShapeConstraintSpec,
    basis: polynomials.BasisSpec,
    state: DiscretizationState,
    jitter: float = 1e-8,
) -> qp.QuadraticProgram:
    """Build the least-squares QP restricted to the current constraint points.

    Parameters
    ----------
    dataset: `Dataset`
        The training data in scaled coordinates.
    spec: `ShapeConstraintSpec`
        The shape requirements.
    basis: `BasisSpec`
        The monomial basis.
    state: `DiscretizationState`
        The constraint points per entry.
    jitter: `float`
        The Hessian gets ``jitter * trace(Phi^T Phi) / N_m`` added to its
        diagonal.

    Returns
    -------
    `QuadraticProgram`
        Hessian Phi^T Phi + lambda I, linear term Phi^T t and one constraint
        sign * d phi(x) >= 0 per entry and point, in entry order.
    """
    design = polynomials.design_matrix(basis, dataset.inputs)
    gram = design.T @ design
    trace = float(np.trace(gram))
    regularization = jitter * trace / basis.num_terms if trace > 0.0 else jitter
    hessian = gram + regularization * np.eye(basis.num_terms)
    # Exact symmetry for the Cholesky-based checks downstream.
    hessian = 0.5 * (hessian + hessian.T)

    columns = [np.zeros((basis.num_terms, 0))]
    for entry in spec.entries:
        points = state.points(entry)
        if points.shape[0] == 0:
            continue
        rows = polynomials.design_matrix_partial(
            basis, points, direction=entry.direction, order=entry.order
        )
        columns.append(entry.sign * rows.T)
    constraints = np.hstack(columns)
    return qp.QuadraticProgram(
        hessian=hessian,
        linear=design.T @ dataset.targets,
        constraints=constraints,
        bounds=np.zeros(constraints.shape[1]),
    )


def lower_level_search(
    coefficients: np.ndarray,
    basis: polynomials.BasisSpec,
    entry: ConstraintEntry,
    box: globalopt.Box,
    restarts: Optional[int] = None,
    workers: int = 1,
    registry: Optional[metrics.MetricRegistry] = None,
) -> tuple[np.ndarray, float]:
    """Search the box for the worst violation of one entry.

    Minimizes g(x) = sign * d^order/dx_j^order (w^T phi(x)) over the box.

    Returns
    -------
    `tuple[numpy.ndarray, float]`
        The best point found and g there; g < 0 means a violation.
    """
    orders = entry.derivative_orders(basis.dim)
    derivative = polynomials.MonomialSum.derivative_of(basis, coefficients, orders)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = derivative.value_and_gradient(x)
        return entry.sign * value, entry.sign * gradient

    result = globalopt.minimize_box(
        objective, box, restarts=restarts, workers=workers, registry=registry
    )
    logger.debug(
        "lower level %s: worst value %.6g at %s", entry.label, result.value, result.argmin
    )
    return result.argmin, result.value


def reference_grid_check(
    model: PolynomialModel,
    spec: ShapeConstraintSpec,
    resolution: int,
    tolerances: dict[ConstraintEntry, float],
) -> list[Violation]:
    """Scan the scaled unit grid for violations beyond the tolerances.

    Parameters
    ----------
    model: `PolynomialModel`
        The model to check.
    spec: `ShapeConstraintSpec`
        The shape requirements.
    resolution: `int`
        The points per dimension of the grid, at least 2.
    tolerances: `dict[ConstraintEntry, float]`
        The scaled-unit tolerance of each entry.

    Returns
    -------
    `list[Violation]`
        For every entry whose smallest sign * derivative is below
        -tolerance, the grid point where it is smallest; ties go to the
        lexicographically first grid point.
    """
    axes = grids.unit_axes(model.dim, resolution)
    violations = []
    for entry in spec.entries:
        best_value = np.inf
        best_point = None
        for chunk in grids.iter_chunks(axes):
            values = entry.sign * model.derivative_scaled(
                chunk, entry.direction, entry.order
            )
            index = int(np.argmin(values))
            if values[index] < best_value:
                best_value = float(values[index])
                best_point = chunk[index]
        if best_point is not None and best_value < -tolerances[entry]:
            violations.append(Violation(entry=entry, point=best_point, value=best_value))
    return violations


def fit(
    dataset: data.Dataset,
    spec: ShapeConstraintSpec,
    degree: int,
    options: Optional[FitOptions] = None,
    registry: Optional[metrics.MetricRegistry] = None,
) -> tuple[PolynomialModel, FitReport]:
    """Fit a polynomial of total degree `degree` under shape constraints.

    Parameters
    ----------
    dataset: `Dataset`
        The training data in raw units.
    spec: `ShapeConstraintSpec`
        The shape requirements; an empty spec gives a least-squares fit.
    degree: `int`
        The total degree m, at least 1.
    options: `Optional[FitOptions]`
        Tuning parameters; defaults when omitted.
    registry: `Optional[metrics.MetricRegistry]`
        Receives the ``siamor.*`` and ``globalopt.*`` metrics.

    Returns
    -------
    `tuple[PolynomialModel, FitReport]`
        The model solving the final QP and its report; the report's status
        is always `FitStatus.CONVERGED`.

    Raises
    ------
    `MaxIterationsError`
        If violations remain after the iteration cap or no new point can be
        added; ``model`` and ``report`` of the error hold the last iterate.
        A QP that exhausts its active-set budget after the first iteration
        raises it too, with the previous iterate attached.
    `DegenerateRangeError`
        If a constrained direction has zero input range.
    """
    options = options if options is not None else FitOptions()
    if degree < 1:
        raise ValueError(f"degree must be at least 1, got {degree}.")
    spec.validate_dim(dataset.dim)
    raw_tolerances = _raw_tolerances(dataset, spec, options)

    input_scaling = data.AffineScaling.for_inputs(dataset.inputs)
    target_scaling = data.AffineScaling.for_targets(dataset.targets)
    scaled = data.scale_dataset(dataset, input_scaling, target_scaling)
    tolerances = {
        entry: raw_tolerances[entry]
        * input_scaling.scale[entry.direction] ** entry.order
        / target_scaling.scale[0]
        for entry in spec.entries
    }

    basis = polynomials.BasisSpec(dim=dataset.dim, degree=degree)
    box = globalopt.Box.unit(dataset.dim)
    state = DiscretizationState.initial(
        spec,
        dataset.dim,
        options.initial_resolution(dataset.dim),
        options.duplicate_tolerance,
    )
    iteration_counter = metrics.counter(registry, "siamor.iterations")
    adaptive_counter = metrics.counter(registry, "siamor.points.adaptive")
    reference_counter = metrics.counter(registry, "siamor.points.reference")
    violation_histogram = metrics.histogram(registry, "siamor.worst_violation")

    history: list[IterationRecord] = []
    previous: Optional[tuple[PolynomialModel, FitReport]] = None
    iteration = 0
    while True:
        program = assemble_upper_level(scaled, spec, basis, state, options.jitter)
        try:
            solution = qp.solve_qp(program)
        except fit_exceptions.MaxIterationsError as error:
            if previous is None:
                raise
            logger.warning(
                "iteration %d: %s; keeping the iterate of iteration %d",
                iteration,
                error,
                iteration - 1,
            )
            raise fit_exceptions.MaxIterationsError(
                error.limit,
                what="active-set solver",
                model=previous[0],
                report=previous[1],
            ) from error
        model = PolynomialModel(basis, solution.w, input_scaling, target_scaling)
        if iteration_counter is not None:
            iteration_counter.increase()

        # Lower-level searches of the current iterate.
        searches = _search_all(solution.w, basis, spec, box, options, registry)
        worst = {entry.label: value for entry, (_, value) in zip(spec.entries, searches)}
        candidates = [
            (entry, point, Provenance.ADAPTIVE)
            for entry, (point, value) in zip(spec.entries, searches)
            if value < -tolerances[entry] and state.is_new(entry, point)
        ]
        stage = "lower-level"
        if not candidates:
            violations = reference_grid_check(
                model, spec, options.reference_grid, tolerances
            )
            for violation in violations:
                label = violation.entry.label
                worst[label] = min(worst.get(label, np.inf), violation.value)
            candidates = [
                (violation.entry, violation.point, Provenance.REFERENCE_GRID)
                for violation in violations
                if state.is_new(violation.entry, violation.point)
            ]
            if not violations:
                stage = "converged"
            else:
                stage = "reference-grid"
        if violation_histogram is not None and worst:
            violation_histogram.update(min(worst.values()))

        record = IterationRecord(
            iteration=iteration,
            objective=solution.objective,
            constraints=program.num_constraints,
            worst_violations=worst,
            added=tuple(entry.label for entry, _, _ in candidates),
            stage=stage,
        )
        history.append(record)
        logger.info(
            "iteration %d: %d constraints, worst violations %s",
            iteration,
            program.num_constraints,
            _format_violations(worst),
        )

        if stage == "converged":
            report = _report(
                model,
                dataset,
                state,
                iteration,
                FitStatus.CONVERGED,
                history,
                raw_tolerances,
            )
            logger.info(report.describe())
            return model, report

        if not candidates or iteration >= options.max_iterations:
            if not candidates:
                logger.warning(
                    "iteration %d: violations persist but every candidate point "
                    "is already a constraint point",
                    iteration,
                )
            report = _report(
                model,
                dataset,
                state,
                iteration,
                FitStatus.MAX_ITERATIONS,
                history,
                raw_tolerances,
            )
            logger.warning(report.describe())
            raise fit_exceptions.MaxIterationsError(
                options.max_iterations,
                what="adaptive discretization",
                model=model,
                report=report,
            )

        previous = (
            model,
            _report(
                model,
                dataset,
                state,
                iteration,
                FitStatus.MAX_ITERATIONS,
                history,
                raw_tolerances,
            ),
        )
        for entry, point, provenance in candidates:
            state.add(entry, point, provenance)
            counter = (
                adaptive_counter
                if provenance is Provenance.ADAPTIVE
                else reference_counter
            )
            if counter is not None:
                counter.increase()
        iteration += 1


@dataclasses.dataclass(frozen=True)
class SweepRow:
    """The outcome of one degree of a `degree_sweep`."""

    degree: int
    model: PolynomialModel
    report: FitReport


def degree_sweep(
    dataset: data.Dataset,
    spec: ShapeConstraintSpec,
    degrees: Sequence[int],
    options: Optional[FitOptions] = None,
    registry: Optional[metrics.MetricRegistry] = None,
) -> list[SweepRow]:
    """Fit every degree in turn, keeping non-converged fits as rows too.

    Choosing the largest degree that does not overfit is left to the caller.
    """
    rows = []
    for degree in degrees:
        try:
            model, report = fit(dataset, spec, degree, options, registry)
        except fit_exceptions.MaxIterationsError as error:
            model, report = error.model, error.report
        rows.append(SweepRow(degree=degree, model=model, report=report))
    return rows


def _raw_tolerances(
    dataset: data.Dataset, spec: ShapeConstraintSpec, options: FitOptions
) -> dict[ConstraintEntry, float]:
    if options.epsilon is None:
        return epsilon_tolerances(dataset, spec)
    if len(options.epsilon) != len(spec.entries):
        raise ValueError(
            f"{len(options.epsilon)} tolerances for {len(spec.entries)} entries."
        )
    _constrained_widths(dataset, spec)
    return dict(zip(spec.entries, options.epsilon))


def _constrained_widths(
    dataset: data.Dataset, spec: ShapeConstraintSpec
) -> np.ndarray:
    widths = dataset.upper - dataset.lower
    for entry in spec.entries:
        if widths[entry.direction] <= 0.0:
            raise fit_exceptions.DegenerateRangeError(entry.direction)
    return widths


def _search_all(
    coefficients: np.ndarray,
    basis: polynomials.BasisSpec,
    spec: ShapeConstraintSpec,
    box: globalopt.Box,
    options: FitOptions,
    registry: Optional[metrics.MetricRegistry],
) -> list[tuple[np.ndarray, float]]:
    def search(entry: ConstraintEntry) -> tuple[np.ndarray, float]:
        return lower_level_search(
            coefficients,
            basis,
            entry,
            box,
            restarts=options.restarts,
            registry=registry,
        )

    if options.workers > 1 and len(spec.entries) > 1:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=options.workers
        ) as pool:
            return list(pool.map(search, spec.entries))
    return [search(entry) for entry in spec.entries]


def _report(
    model: PolynomialModel,
    dataset: data.Dataset,
    state: DiscretizationState,
    iteration: int,
    status: FitStatus,
    history: list[IterationRecord],
    raw_tolerances: dict[ConstraintEntry, float],
) -> FitReport:
    added = {
        entry.label: state.count(Provenance.ADAPTIVE, entry)
        + state.count(Provenance.REFERENCE_GRID, entry)
        for entry in state.entries
    }
    return FitReport(
        iterations=iteration,
        total_constraints=state.total,
        added_points=added,
        rmse=data.rmse(model.predict(dataset.inputs), dataset.targets),
        status=status,
        history=tuple(history),
        tolerances={entry.label: value for entry, value in raw_tolerances.items()},
    )


def _format_violations(worst: dict[str, float]) -> str:
    if not worst:
        return "none"
    return ", ".join(f"{label}: {value:.3g}" for label, value in worst.items())
