# Copyright © 2021 by Shun Huang. All rights reserved.
# Licensed under MIT License.
# See LICENSE in the project root for license information.

"""Versioned JSON documents for fitted models and grid functions.

Both documents carry a ``format`` name and an integer ``version``; reading a
document of another format or version fails. Floats are written by `json` in
their shortest round-trip form, so a saved model predicts bit-identically after
loading. Directions are 1-based in both documents.
"""

import dataclasses
import json

import numpy as np

from typing import Any, Optional

from shapefit import dataset as data
from shapefit import fit_exceptions
from shapefit.regression import basis as polynomials
from shapefit.regression import shapeops
from shapefit.regression import siamor


MODEL_FORMAT = "shapefit-model"
GRID_FORMAT = "shapefit-grid"
VERSION = 1


@dataclasses.dataclass(frozen=True)
class ModelFile:
    """The content of a model document.

    Attributes
    ----------
    model: `PolynomialModel`
        The fitted model.
    spec: `ShapeConstraintSpec`
        The constraints the model was fitted under.
    report: `Optional[dict]`
        The fit report summary, if one was saved.
    """

    model: siamor.PolynomialModel
    spec: siamor.ShapeConstraintSpec = siamor.ShapeConstraintSpec()
    report: Optional[dict] = None


def report_summary(report: siamor.FitReport) -> dict:
    """Return the JSON-ready summary of a fit report."""
    return {
        "status": report.status.value,
        "iterations": report.iterations,
        "total_constraints": report.total_constraints,
        "added_points": dict(report.added_points),
        "rmse": report.rmse,
        "tolerances": dict(report.tolerances),
    }


def save_model(
    path: data.PathLike,
    model: siamor.PolynomialModel,
    spec: Optional[siamor.ShapeConstraintSpec] = None,
    report: Optional[siamor.FitReport] = None,
) -> None:
    """Write a model document."""
    spec = spec if spec is not None else siamor.ShapeConstraintSpec()
    document = {
        "format": MODEL_FORMAT,
        "version": VERSION,
        "basis": {
            "dim": model.basis.dim,
            "degree": model.basis.degree,
            "ordering": model.basis.ordering,
        },
        "coefficients": model.coefficients.tolist(),
        "input_scaling": _scaling_document(model.input_scaling),
        "target_scaling": _scaling_document(model.target_scaling),
        "constraints": [
            {
                "direction": entry.direction + 1,
                "order": entry.order,
                "sign": entry.sign,
            }
            for entry in spec.entries
        ],
        "report": report_summary(report) if report is not None else None,
    }
    _write(path, document)


def load_model(path: data.PathLike) -> ModelFile:
    """Read a model document.

    Raises
    ------
    `ModelFormatError`
        If the document is malformed or of another format or version.
    """
    document = _read(path, MODEL_FORMAT)
    try:
        basis = polynomials.BasisSpec(
            dim=int(document["basis"]["dim"]),
            degree=int(document["basis"]["degree"]),
            ordering=str(document["basis"]["ordering"]),
        )
        model = siamor.PolynomialModel(
            basis=basis,
            coefficients=np.array(document["coefficients"], dtype=float),
            input_scaling=_scaling(document["input_scaling"]),
            target_scaling=_scaling(document["target_scaling"]),
        )
        spec = siamor.ShapeConstraintSpec(
            entries=tuple(
                siamor.ConstraintEntry(
                    direction=int(item["direction"]) - 1,
                    order=int(item["order"]),
                    sign=int(item["sign"]),
                )
                for item in document["constraints"]
            )
        )
        spec.validate_dim(basis.dim)
    except (KeyError, TypeError, ValueError) as error:
        raise fit_exceptions.ModelFormatError(str(path), f"bad model: {error}") from error
    return ModelFile(model=model, spec=spec, report=document.get("report"))


def save_grid(path: data.PathLike, grid: shapeops.GridFunction) -> None:
    """Write a grid document; values are flattened in C order."""
    _write(
        path,
        {
            "format": GRID_FORMAT,
            "version": VERSION,
            "coordinates": [axis.tolist() for axis in grid.coordinates],
            "values": grid.values.ravel().tolist(),
        },
    )


def load_grid(path: data.PathLike) -> shapeops.GridFunction:
    """Read a grid document.

    Raises
    ------
    `ModelFormatError`
        If the document is malformed or of another format or version.
    """
    document = _read(path, GRID_FORMAT)
    try:
        return shapeops.GridFunction(
            coordinates=tuple(
                np.array(axis, dtype=float) for axis in document["coordinates"]
            ),
            values=np.array(document["values"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise fit_exceptions.ModelFormatError(str(path), f"bad grid: {error}") from error


def document_format(path: data.PathLike) -> str:
    """Return the ``format`` name of a model or grid document."""
    document = _read(path, None)
    name = document.get("format")
    if name not in (MODEL_FORMAT, GRID_FORMAT):
        raise fit_exceptions.ModelFormatError(str(path), f"unknown format {name!r}")
    return name


def _scaling_document(scaling: data.AffineScaling) -> dict:
    return {"offset": scaling.offset.tolist(), "scale": scaling.scale.tolist()}


def _scaling(document: dict) -> data.AffineScaling:
    return data.AffineScaling(
        offset=np.array(document["offset"], dtype=float),
        scale=np.array(document["scale"], dtype=float),
    )


def _write(path: data.PathLike, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(document, stream, indent=2, allow_nan=False)
        stream.write("\n")


def _read(path: data.PathLike, expected: Optional[str]) -> dict[str, Any]:
    with open(path, encoding="utf-8") as stream:
        try:
            document = json.load(stream)
        except json.JSONDecodeError as error:
            raise fit_exceptions.ModelFormatError(str(path), f"not JSON: {error}") from None
        except UnicodeDecodeError:
            raise fit_exceptions.ModelFormatError(str(path), "not UTF-8 text") from None
    if not isinstance(document, dict):
        raise fit_exceptions.ModelFormatError(str(path), "not a JSON object")
    if expected is not None and document.get("format") != expected:
        raise fit_exceptions.ModelFormatError(
            str(path), f"expected format {expected!r}, got {document.get('format')!r}"
        )
    if document.get("version") != VERSION:
        raise fit_exceptions.ModelFormatError(
            str(path), f"unsupported version {document.get('version')!r}"
        )
    return document
