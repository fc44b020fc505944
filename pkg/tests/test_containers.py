import struct

import numpy as np
import pytest

from cellflow.containers import (
    ContainerFormatError,
    read_flow_file,
    read_patch_file,
    write_flow_file,
    write_patch_file,
)
from cellflow.flow import FlowField


def random_fields(pairs=3, h=5, w=7, seed=0):
    rng = np.random.default_rng(seed)
    return [
        FlowField(u=rng.standard_normal((h, w)), v=rng.standard_normal((h, w)))
        for _ in range(pairs)
    ]


META = {
    "culture": "c3", "x": 96, "y": 0, "start_frame": 4, "frame_stride": 2,
    "normalized": True, "flipped_h": False, "flipped_v": False,
}


class TestFlowFile:
    def test_header_layout(self, tmp_path):
        path = tmp_path / "f.cflo"
        write_flow_file(path, random_fields(pairs=9, h=4, w=6))
        blob = path.read_bytes()
        assert blob[:4] == b"CFLO"
        assert struct.unpack("<IIII", blob[4:20]) == (1, 9, 4, 6)
        assert len(blob) == 20 + 2 * 9 * 4 * 6 * 4

    def test_round_trip_float32_exact(self, tmp_path):
        fields = random_fields()
        path = tmp_path / "f.cflo"
        write_flow_file(path, fields)
        back = read_flow_file(path)
        assert len(back) == len(fields)
        for orig, rt in zip(fields, back):
            np.testing.assert_array_equal(rt.u, orig.u.astype(np.float32).astype(np.float64))
            np.testing.assert_array_equal(rt.v, orig.v.astype(np.float32).astype(np.float64))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cflo"
        path.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(ContainerFormatError):
            read_flow_file(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.cflo"
        write_flow_file(path, random_fields())
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ContainerFormatError):
            read_flow_file(path)

    def test_inconsistent_shapes_rejected(self, tmp_path):
        fields = [
            FlowField(u=np.zeros((3, 3)), v=np.zeros((3, 3))),
            FlowField(u=np.zeros((4, 3)), v=np.zeros((4, 3))),
        ]
        with pytest.raises(ValueError):
            write_flow_file(tmp_path / "x.cflo", fields)


class TestPatchFile:
    def test_header_and_blob(self, tmp_path):
        tensor = np.zeros((10, 8, 8, 3), dtype=np.float32)
        path = tmp_path / "p.cvid"
        write_patch_file(path, tensor, META)
        blob = path.read_bytes()
        assert blob[:4] == b"CVID"
        assert struct.unpack("<IIII", blob[4:20]) == (1, 10, 8, 3)
        payload = 10 * 8 * 8 * 3 * 4
        (meta_len,) = struct.unpack("<I", blob[20 + payload:24 + payload])
        assert len(blob) == 24 + payload + meta_len

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        tensor = rng.standard_normal((4, 6, 6, 3)).astype(np.float32)
        path = tmp_path / "p.cvid"
        write_patch_file(path, tensor, META)
        back, meta = read_patch_file(path)
        np.testing.assert_array_equal(back, tensor)
        assert meta == META

    def test_missing_metadata_keys(self, tmp_path):
        with pytest.raises(ValueError):
            write_patch_file(tmp_path / "p.cvid", np.zeros((2, 4, 4, 3)), {"culture": "x"})

    def test_bad_shape(self, tmp_path):
        with pytest.raises(ValueError):
            write_patch_file(tmp_path / "p.cvid", np.zeros((2, 4, 5, 3)), META)

    def test_trailing_bytes_detected(self, tmp_path):
        path = tmp_path / "p.cvid"
        write_patch_file(path, np.zeros((2, 4, 4, 3), dtype=np.float32), META)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(ContainerFormatError):
            read_patch_file(path)
