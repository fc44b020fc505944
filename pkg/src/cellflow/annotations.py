"""Traced-cell annotation data: types, JSON schema, and validation.

The JSON layout is the wire contract shared by the stats pipeline, the
annotation service, and the browser tracing tool:

    {
      "source": "...", "px_per_micron": 1.1939,
      "cells": [{"id", "label", "polygon": [[x, y], ...],
                 "long_axis": [[x, y], [x, y]], "center": [x, y]}],
      "neurites": [{"id", "cell_id", "points": [[x, y], ...],
                    "termination", "connected_cell_id"?, "branches": [...]}]
    }

Branches nest recursively inside their parent neurite and carry no cell_id.
Coordinates are unscaled pixel positions (x along columns, y along rows);
micron conversion happens only when measurements are taken.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import AnnotationSchemaError

__all__ = [
    "CellBodyTrace",
    "NeuriteTrace",
    "AnnotationSet",
    "ANNOTATION_SCHEMA",
    "validate_annotation_json",
    "annotation_from_json",
    "annotation_to_json",
    "load_annotation_file",
    "save_annotation_file",
]

CELL_LABELS = ("neuron", "dead_cell")
TERMINATIONS = ("self_terminated", "connected")

# Branch anchors are snapped to the parent polyline by the tracing tool;
# the tolerance only absorbs decimal round-tripping.
BRANCH_ANCHOR_TOL = 1e-3

_POINT = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

_BRANCH = {
    "type": "object",
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "points": {"type": "array", "items": _POINT, "minItems": 2},
        "termination": {"enum": list(TERMINATIONS)},
        "connected_cell_id": {"type": "string"},
        "branches": {"type": "array", "items": {"$ref": "#/$defs/branch"}},
    },
    "required": ["id", "points", "termination"],
    "additionalProperties": False,
}

_NEURITE = dict(_BRANCH)
_NEURITE["properties"] = dict(_BRANCH["properties"], cell_id={"type": "string"})
_NEURITE["required"] = ["id", "cell_id", "points", "termination"]

ANNOTATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "$defs": {"branch": _BRANCH},
    "properties": {
        "source": {"type": "string"},
        "px_per_micron": {"type": "number", "exclusiveMinimum": 0},
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "label": {"enum": list(CELL_LABELS)},
                    "polygon": {"type": "array", "items": _POINT, "minItems": 3},
                    "long_axis": {
                        "type": "array", "items": _POINT,
                        "minItems": 2, "maxItems": 2,
                    },
                    "center": _POINT,
                },
                "required": ["id", "label", "polygon", "long_axis", "center"],
                "additionalProperties": False,
            },
        },
        "neurites": {"type": "array", "items": _NEURITE},
    },
    "required": ["source", "px_per_micron", "cells", "neurites"],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(ANNOTATION_SCHEMA)


@dataclass
class CellBodyTrace:
    id: str
    label: str
    polygon: list[tuple[float, float]]
    long_axis: tuple[tuple[float, float], tuple[float, float]]
    center: tuple[float, float]


@dataclass
class NeuriteTrace:
    id: str
    points: list[tuple[float, float]]
    termination: str
    cell_id: str | None = None  # present on top-level neurites only
    connected_cell_id: str | None = None
    branches: list["NeuriteTrace"] = field(default_factory=list)


@dataclass
class AnnotationSet:
    source: str
    cells: list[CellBodyTrace]
    neurites: list[NeuriteTrace]
    px_per_micron: float = 1.1939

    def cell_by_id(self, cell_id: str) -> CellBodyTrace:
        for cell in self.cells:
            if cell.id == cell_id:
                return cell
        raise AnnotationSchemaError("neurites", f"unknown cell id {cell_id!r}")


def _json_path(abs_path) -> str:
    parts = []
    for p in abs_path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(f".{p}" if parts else str(p))
    return "".join(parts) or "$"


def _point_on_polyline(point, polyline, tol: float) -> bool:
    px, py = point
    for (x1, y1), (x2, y2) in zip(polyline, polyline[1:]):
        dx, dy = x2 - x1, y2 - y1
        seg_sq = dx * dx + dy * dy
        if seg_sq == 0.0:
            t = 0.0
        else:
            t = max(0.0, min(1.0, ((px - x1) * dx + (py - y1) * dy) / seg_sq))
        cx, cy = x1 + t * dx, y1 + t * dy
        if (px - cx) ** 2 + (py - cy) ** 2 <= tol * tol:
            return True
    return False


def _check_trace_semantics(node: dict, path: str, cell_ids: set, seen_ids: set) -> None:
    if node["id"] in seen_ids:
        raise AnnotationSchemaError(f"{path}.id", f"duplicate trace id {node['id']!r}")
    seen_ids.add(node["id"])
    if node["termination"] == "connected":
        target = node.get("connected_cell_id")
        if target is None:
            raise AnnotationSchemaError(
                f"{path}.connected_cell_id",
                "required when termination is 'connected'",
            )
        if target not in cell_ids:
            raise AnnotationSchemaError(
                f"{path}.connected_cell_id", f"unknown cell id {target!r}"
            )
    for b, branch in enumerate(node.get("branches", ())):
        branch_path = f"{path}.branches[{b}]"
        if not _point_on_polyline(branch["points"][0], node["points"], BRANCH_ANCHOR_TOL):
            raise AnnotationSchemaError(
                f"{branch_path}.points[0]",
                "branch must start on its parent polyline",
            )
        _check_trace_semantics(branch, branch_path, cell_ids, seen_ids)


def validate_annotation_json(doc) -> None:
    """Raise AnnotationSchemaError (with a JSON path) on any violation."""
    error = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(doc))
    if error is not None:
        message = error.message
        if error.validator == "minItems":
            message += f" (at least {error.validator_value} items required)"
        raise AnnotationSchemaError(_json_path(error.absolute_path), message)

    cell_ids = set()
    for i, cell in enumerate(doc["cells"]):
        if cell["id"] in cell_ids:
            raise AnnotationSchemaError(f"cells[{i}].id", f"duplicate cell id {cell['id']!r}")
        cell_ids.add(cell["id"])
        (x1, y1), (x2, y2) = cell["long_axis"]
        if x1 == x2 and y1 == y2:
            raise AnnotationSchemaError(
                f"cells[{i}].long_axis", "long-axis endpoints must be distinct"
            )

    seen_trace_ids: set = set()
    for i, neurite in enumerate(doc["neurites"]):
        path = f"neurites[{i}]"
        if neurite["cell_id"] not in cell_ids:
            raise AnnotationSchemaError(
                f"{path}.cell_id", f"unknown cell id {neurite['cell_id']!r}"
            )
        _check_trace_semantics(neurite, path, cell_ids, seen_trace_ids)


def _trace_from_json(node: dict, top_level: bool) -> NeuriteTrace:
    return NeuriteTrace(
        id=node["id"],
        points=[tuple(p) for p in node["points"]],
        termination=node["termination"],
        cell_id=node.get("cell_id") if top_level else None,
        connected_cell_id=node.get("connected_cell_id"),
        branches=[_trace_from_json(b, False) for b in node.get("branches", ())],
    )


def annotation_from_json(doc) -> AnnotationSet:
    """Validate a parsed JSON document and build the typed annotation set."""
    validate_annotation_json(doc)
    cells = [
        CellBodyTrace(
            id=c["id"],
            label=c["label"],
            polygon=[tuple(p) for p in c["polygon"]],
            long_axis=(tuple(c["long_axis"][0]), tuple(c["long_axis"][1])),
            center=tuple(c["center"]),
        )
        for c in doc["cells"]
    ]
    neurites = [_trace_from_json(n, True) for n in doc["neurites"]]
    return AnnotationSet(
        source=doc["source"],
        cells=cells,
        neurites=neurites,
        px_per_micron=doc["px_per_micron"],
    )


def _trace_to_json(trace: NeuriteTrace, top_level: bool) -> dict:
    node = {
        "id": trace.id,
        "points": [list(p) for p in trace.points],
        "termination": trace.termination,
    }
    if top_level:
        node["cell_id"] = trace.cell_id
    if trace.connected_cell_id is not None:
        node["connected_cell_id"] = trace.connected_cell_id
    if trace.branches:
        node["branches"] = [_trace_to_json(b, False) for b in trace.branches]
    return node


def annotation_to_json(annotations: AnnotationSet) -> dict:
    return {
        "source": annotations.source,
        "px_per_micron": annotations.px_per_micron,
        "cells": [
            {
                "id": c.id,
                "label": c.label,
                "polygon": [list(p) for p in c.polygon],
                "long_axis": [list(c.long_axis[0]), list(c.long_axis[1])],
                "center": list(c.center),
            }
            for c in annotations.cells
        ],
        "neurites": [_trace_to_json(n, True) for n in annotations.neurites],
    }


def load_annotation_file(path) -> AnnotationSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return annotation_from_json(doc)


def save_annotation_file(path, annotations: AnnotationSet) -> None:
    doc = annotation_to_json(annotations)
    validate_annotation_json(doc)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
