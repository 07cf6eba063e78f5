# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Training data sets, affine scalings and the CSV data format.

A data file is UTF-8 CSV with a header row ``x1,...,xd,target`` and ``.`` as
decimal separator. Values are written in the shortest representation that
reads back to the identical float; reading parses with round-trip precision.
"""

import dataclasses
import os

import numpy as np
import pandas as pd

from typing import Optional, Sequence, Union

from shapefit import fit_exceptions


PathLike = Union[str, os.PathLike]
"""Alias for accepted file path types."""

TARGET_COLUMN = "target"
"""Header of the target column of a data file."""


@dataclasses.dataclass(frozen=True)
class Dataset:
    """N input points in d dimensions with scalar targets.

    Attributes
    ----------
    inputs: `numpy.ndarray`
        The (N, d) input points, raw units.
    targets: `numpy.ndarray`
        The N targets, raw units.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.array(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, np.newaxis]
        targets = np.array(self.targets, dtype=float).ravel()
        if inputs.ndim != 2 or inputs.shape[0] == 0 or inputs.shape[1] == 0:
            raise ValueError("a data set needs at least one point of dimension >= 1.")
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(
                f"{inputs.shape[0]} input points but {targets.shape[0]} targets."
            )
        if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(targets)):
            raise ValueError("inputs and targets must be finite.")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def size(self) -> int:
        """int: The number of points N."""
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        """int: The input dimension d."""
        return self.inputs.shape[1]

    @property
    def lower(self) -> np.ndarray:
        """numpy.ndarray: The per-direction minimum a_j of the inputs."""
        return self.inputs.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        """numpy.ndarray: The per-direction maximum b_j of the inputs."""
        return self.inputs.max(axis=0)

    @property
    def target_range(self) -> float:
        """float: max t - min t."""
        return float(self.targets.max() - self.targets.min())


@dataclasses.dataclass(frozen=True)
class AffineScaling:
    """The per-component affine map u = (v - offset) / scale and its inverse."""

    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if offset.shape != scale.shape:
            raise ValueError("offset and scale must have equal shapes.")
        if np.any(scale <= 0.0):
            raise ValueError("scale factors must be positive.")
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def identity(cls, dim: int) -> "AffineScaling":
        """Return the map that leaves `dim` components unchanged."""
        return cls(offset=np.zeros(dim), scale=np.ones(dim))

    @classmethod
    def for_inputs(cls, inputs: np.ndarray) -> "AffineScaling":
        """Map the bounding box of the inputs onto the unit box.

        Directions with zero range are only shifted.
        """
        lower = inputs.min(axis=0)
        width = inputs.max(axis=0) - lower
        return cls(offset=lower, scale=np.where(width > 0.0, width, 1.0))

    @classmethod
    def for_targets(cls, targets: np.ndarray) -> "AffineScaling":
        """Center the targets at their mean and scale them to unit range."""
        width = float(targets.max() - targets.min())
        return cls(
            offset=np.array([targets.mean()]),
            scale=np.array([width if width > 0.0 else 1.0]),
        )

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Apply the map."""
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def inverse(self, values: np.ndarray) -> np.ndarray:
        """Undo the map."""
        return self.offset + np.asarray(values, dtype=float) * self.scale


def scale_dataset(
    dataset: Dataset, inputs: AffineScaling, targets: AffineScaling
) -> Dataset:
    """Return the data set in scaled coordinates."""
    return Dataset(
        inputs=inputs.forward(dataset.inputs),
        targets=targets.forward(dataset.targets),
    )


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Return sqrt(sum((prediction - target)^2) / N)."""
    residuals = np.asarray(predictions, dtype=float) - np.asarray(targets, dtype=float)
    return float(np.sqrt(np.mean(residuals**2)))


def input_header(dim: int) -> list[str]:
    """Return the column names ``x1..xd``."""
    return [f"x{j + 1}" for j in range(dim)]


def read_csv(path: PathLike) -> Dataset:
    """Read a data set from a ``x1..xd,target`` CSV file.

    Raises
    ------
    `DatasetError`
        If the header or any value is malformed.
    """
    header, rows = _read_table(path)
    dim = len(header) - 1
    if dim < 1 or header != input_header(dim) + [TARGET_COLUMN]:
        raise fit_exceptions.DatasetError(
            str(path), f"expected header x1..xd,target, got {','.join(header)}"
        )
    try:
        return Dataset(inputs=rows[:, :dim], targets=rows[:, dim])
    except ValueError as error:
        raise fit_exceptions.DatasetError(str(path), str(error)) from error


def read_points_csv(path: PathLike, dim: Optional[int] = None) -> np.ndarray:
    """Read input points from a CSV file with header ``x1..xd``.

    A trailing ``target`` column is accepted and ignored, so data files can
    be used as point files.
    """
    header, rows = _read_table(path)
    if header and header[-1] == TARGET_COLUMN:
        header, rows = header[:-1], rows[:, :-1]
    if not header or header != input_header(len(header)):
        raise fit_exceptions.DatasetError(
            str(path), f"expected header x1..xd, got {','.join(header)}"
        )
    if dim is not None and len(header) != dim:
        raise fit_exceptions.DimensionMismatchError(dim, len(header))
    if not np.all(np.isfinite(rows)):
        raise fit_exceptions.DatasetError(str(path), "points must be finite")
    return rows


def write_csv(dataset: Dataset, path: PathLike) -> None:
    """Write a data set as ``x1..xd,target`` CSV."""
    header = input_header(dataset.dim) + [TARGET_COLUMN]
    columns = [dataset.inputs[:, j] for j in range(dataset.dim)] + [dataset.targets]
    write_columns(path, header, columns)


def write_columns(
    path: PathLike, header: Sequence[str], columns: Sequence[np.ndarray]
) -> None:
    """Write equally long numeric columns under the given header."""
    frame = pd.DataFrame(
        {name: np.asarray(column, dtype=float) for name, column in zip(header, columns)}
    )
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def _read_table(path: PathLike) -> tuple[list[str], np.ndarray]:
    try:
        frame = pd.read_csv(
            path,
            index_col=False,
            skipinitialspace=True,
            float_precision="round_trip",
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise fit_exceptions.DatasetError(str(path), "empty file") from None
    except pd.errors.ParserError as error:
        raise fit_exceptions.DatasetError(str(path), f"malformed CSV: {error}") from None
    except UnicodeDecodeError:
        raise fit_exceptions.DatasetError(str(path), "not UTF-8 text") from None

    header = [str(name).strip() for name in frame.columns]
    if frame.empty:
        raise fit_exceptions.DatasetError(str(path), "no data rows")
    numeric = [pd.api.types.is_numeric_dtype(dtype) for dtype in frame.dtypes]
    if not all(numeric):
        bad = header[numeric.index(False)]
        raise fit_exceptions.DatasetError(
            str(path), f"column {bad} has a non-numeric field"
        )
    rows = frame.to_numpy(dtype=float)
    if np.isnan(rows).any():
        line = int(np.flatnonzero(np.isnan(rows).any(axis=1))[0]) + 2
        raise fit_exceptions.DatasetError(str(path), f"line {line} has a missing field")
    return header, rows
