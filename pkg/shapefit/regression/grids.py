# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Rectangular tensor grids and their lexicographic traversal."""

import numpy as np

from typing import Iterator, Sequence


Axes = tuple[np.ndarray, ...]
"""Alias for per-dimension coordinate vectors of a tensor grid."""

DEFAULT_CHUNK = 16384
"""Number of grid points handed out per chunk by `iter_chunks`."""


def equidistant_axes(
    lower: Sequence[float], upper: Sequence[float], resolution: int
) -> Axes:
    """Return `resolution` equidistant values from lower to upper per dimension.

    Parameters
    ----------
    lower: `Sequence[float]`
        The lower bound of each dimension.
    upper: `Sequence[float]`
        The upper bound of each dimension.
    resolution: `int`
        The number of values per dimension, at least 2.

    Returns
    -------
    `Axes`
        One coordinate vector per dimension, endpoints included.
    """
    if resolution < 2:
        raise ValueError(f"grid resolution must be at least 2, got {resolution}.")
    return tuple(
        np.linspace(low, high, resolution) for low, high in zip(lower, upper)
    )


def unit_axes(dim: int, resolution: int) -> Axes:
    """Return the equidistant axes of the unit box [0, 1]^dim."""
    return equidistant_axes([0.0] * dim, [1.0] * dim, resolution)


def shape_of(axes: Axes) -> tuple[int, ...]:
    """Return the value-tensor shape of the grid spanned by `axes`."""
    return tuple(len(axis) for axis in axes)


def tensor_points(axes: Axes) -> np.ndarray:
    """Return all grid points as an (n, d) array in lexicographic order.

    The first dimension is the most significant, so row ``i`` corresponds to
    ``numpy.unravel_index(i, shape_of(axes))`` and the array matches a
    C-ordered value tensor.

    Examples
    --------
    >>> tensor_points((np.array([0.0, 1.0]), np.array([5.0, 6.0])))
    array([[0., 5.],
           [0., 6.],
           [1., 5.],
           [1., 6.]])
    """
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([coordinate.ravel() for coordinate in mesh], axis=1)


def iter_chunks(axes: Axes, chunk_size: int = DEFAULT_CHUNK) -> Iterator[np.ndarray]:
    """Traverse the grid in lexicographic order, a chunk of points at a time.

    Parameters
    ----------
    axes: `Axes`
        The grid coordinates.
    chunk_size: `int`
        The maximal number of points per chunk.

    Yields
    ------
    `numpy.ndarray`
        The next (k, d) block of grid points.
    """
    shape = shape_of(axes)
    total = int(np.prod(shape))
    for start in range(0, total, chunk_size):
        flat = np.arange(start, min(start + chunk_size, total))
        indices = np.unravel_index(flat, shape)
        yield np.stack(
            [axis[index] for axis, index in zip(axes, indices)], axis=1
        )
