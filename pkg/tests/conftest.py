"""Common test data for pytest."""

import pathlib

import numpy as np
import pytest

from shapefit import dataset as data


DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "shapefit" / "data"


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(20211017)


@pytest.fixture
def sigmoid_path() -> pathlib.Path:
    """Return the path of the bundled 1D sample."""
    return DATA_DIR / "sigmoid1d.csv"


@pytest.fixture
def sigmoid_data(sigmoid_path: pathlib.Path) -> data.Dataset:
    """Return the bundled 1D sample: six points over 480..560."""
    return data.read_csv(sigmoid_path)


@pytest.fixture
def zigzag_data() -> data.Dataset:
    """Return 1D data that an increasing fit cannot follow."""
    inputs = np.linspace(0.0, 1.0, 8)
    targets = np.array([0.0, 1.0, 0.2, 1.2, 0.4, 1.4, 0.6, 1.6])
    return data.Dataset(inputs=inputs, targets=targets)
