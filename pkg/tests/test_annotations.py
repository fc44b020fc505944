import json

import pytest

from cellflow.annotations import (
    AnnotationSet,
    NeuriteTrace,
    annotation_from_json,
    annotation_to_json,
    load_annotation_file,
    save_annotation_file,
    validate_annotation_json,
)
from cellflow.errors import AnnotationSchemaError


def valid_doc():
    return {
        "source": "video_01",
        "px_per_micron": 1.1939,
        "cells": [
            {
                "id": "c1",
                "label": "neuron",
                "polygon": [[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]],
                "long_axis": [[2.0, 4.0], [2.0, 0.0]],
                "center": [2.0, 2.0],
            },
            {
                "id": "c2",
                "label": "dead_cell",
                "polygon": [[10.0, 10.0], [12.0, 10.0], [11.0, 12.0]],
                "long_axis": [[10.0, 10.0], [12.0, 12.0]],
                "center": [11.0, 11.0],
            },
        ],
        "neurites": [
            {
                "id": "n1",
                "cell_id": "c1",
                "points": [[4.0, 2.0], [9.0, 6.0], [10.0, 10.0]],
                "termination": "connected",
                "connected_cell_id": "c2",
                "branches": [
                    {
                        "id": "n1b1",
                        "points": [[9.0, 6.0], [9.0, 1.0]],
                        "termination": "self_terminated",
                    }
                ],
            }
        ],
    }


class TestValidation:
    def test_valid_document_passes(self):
        validate_annotation_json(valid_doc())

    def test_two_point_polygon_cites_minimum(self):
        doc = valid_doc()
        doc["cells"][0]["polygon"] = [[0.0, 0.0], [1.0, 1.0]]
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "cells[0].polygon"
        assert "at least 3" in str(err.value)

    def test_unknown_label(self):
        doc = valid_doc()
        doc["cells"][1]["label"] = "astrocyte"
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "cells[1].label"

    def test_missing_px_per_micron(self):
        doc = valid_doc()
        del doc["px_per_micron"]
        with pytest.raises(AnnotationSchemaError):
            validate_annotation_json(doc)

    def test_nonpositive_px_per_micron(self):
        doc = valid_doc()
        doc["px_per_micron"] = 0
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "px_per_micron"

    def test_degenerate_long_axis(self):
        doc = valid_doc()
        doc["cells"][0]["long_axis"] = [[1.0, 1.0], [1.0, 1.0]]
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "cells[0].long_axis"

    def test_duplicate_cell_id(self):
        doc = valid_doc()
        doc["cells"][1]["id"] = "c1"
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "cells[1].id"

    def test_dangling_cell_reference(self):
        doc = valid_doc()
        doc["neurites"][0]["cell_id"] = "ghost"
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "neurites[0].cell_id"

    def test_connected_requires_target(self):
        doc = valid_doc()
        del doc["neurites"][0]["connected_cell_id"]
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "neurites[0].connected_cell_id"

    def test_connected_target_must_exist(self):
        doc = valid_doc()
        doc["neurites"][0]["connected_cell_id"] = "ghost"
        with pytest.raises(AnnotationSchemaError):
            validate_annotation_json(doc)

    def test_branch_must_anchor_on_parent(self):
        doc = valid_doc()
        doc["neurites"][0]["branches"][0]["points"][0] = [50.0, 50.0]
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "neurites[0].branches[0].points[0]"

    def test_branch_anchor_mid_segment_ok(self):
        doc = valid_doc()
        # midpoint of the segment (4,2)-(9,6)
        doc["neurites"][0]["branches"][0]["points"][0] = [6.5, 4.0]
        validate_annotation_json(doc)

    def test_unknown_top_level_key(self):
        doc = valid_doc()
        doc["notes"] = "hello"
        with pytest.raises(AnnotationSchemaError):
            validate_annotation_json(doc)

    def test_bad_termination(self):
        doc = valid_doc()
        doc["neurites"][0]["termination"] = "unknown"
        with pytest.raises(AnnotationSchemaError) as err:
            validate_annotation_json(doc)
        assert err.value.json_path == "neurites[0].termination"


class TestRoundTrip:
    def test_from_json_builds_types(self):
        ann = annotation_from_json(valid_doc())
        assert isinstance(ann, AnnotationSet)
        assert ann.px_per_micron == 1.1939
        assert ann.cells[0].label == "neuron"
        assert ann.neurites[0].cell_id == "c1"
        assert isinstance(ann.neurites[0].branches[0], NeuriteTrace)
        assert ann.neurites[0].branches[0].cell_id is None

    def test_json_round_trip(self):
        doc = valid_doc()
        assert annotation_to_json(annotation_from_json(doc)) == doc

    def test_file_round_trip(self, tmp_path):
        ann = annotation_from_json(valid_doc())
        path = tmp_path / "a.json"
        save_annotation_file(path, ann)
        back = load_annotation_file(path)
        assert annotation_to_json(back) == annotation_to_json(ann)

    def test_load_invalid_file(self, tmp_path):
        path = tmp_path / "bad.json"
        doc = valid_doc()
        doc["cells"][0]["polygon"] = [[0, 0], [1, 1]]
        path.write_text(json.dumps(doc))
        with pytest.raises(AnnotationSchemaError):
            load_annotation_file(path)

    def test_cell_by_id(self):
        ann = annotation_from_json(valid_doc())
        assert ann.cell_by_id("c2").label == "dead_cell"
        with pytest.raises(AnnotationSchemaError):
            ann.cell_by_id("zzz")
