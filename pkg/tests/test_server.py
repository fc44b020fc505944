import json
import threading

import numpy as np
import pytest
import requests
from PIL import Image

from cellflow.server import make_server

from test_annotations import valid_doc


@pytest.fixture()
def service(tmp_path):
    frames_dir = tmp_path / "frames"
    for video, count in [("video_a", 3), ("video_b", 2)]:
        d = frames_dir / video
        d.mkdir(parents=True)
        for k in range(count):
            arr = np.full((12, 16), 40 * (k + 1), dtype=np.uint8)
            Image.fromarray(arr, mode="L").save(d / f"frame_{k:03d}.png")
    annotations_dir = tmp_path / "annotations"
    server = make_server(frames_dir, annotations_dir, port=0, px_per_micron=1.1939)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, annotations_dir
    server.shutdown()
    server.server_close()


class TestVideos:
    def test_list_videos(self, service):
        base, _ = service
        resp = requests.get(f"{base}/api/videos")
        assert resp.status_code == 200
        videos = resp.json()
        assert len(videos) == 2
        assert videos[0] == {"id": "video_a", "frame_count": 3, "width": 16, "height": 12}

    def test_get_frame_png(self, service):
        base, _ = service
        resp = requests.get(f"{base}/api/videos/video_a/frames/1")
        assert resp.status_code == 200
        assert resp.headers["Content-Type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_frame_out_of_range(self, service):
        base, _ = service
        assert requests.get(f"{base}/api/videos/video_a/frames/99").status_code == 404

    def test_unknown_video(self, service):
        base, _ = service
        assert requests.get(f"{base}/api/videos/nope/frames/0").status_code == 404


class TestConfigEndpoint:
    def test_config_payload(self, service):
        base, _ = service
        doc = requests.get(f"{base}/api/config").json()
        assert doc == {"px_per_micron": 1.1939, "contrast_cutoff": 0.04}


class TestAnnotations:
    def test_missing_annotation_404(self, service):
        base, _ = service
        assert requests.get(f"{base}/api/annotations/video_a").status_code == 404

    def test_post_then_get_bitwise_round_trip(self, service):
        base, _ = service
        body = json.dumps(valid_doc(), indent=3).encode("utf-8")
        resp = requests.post(
            f"{base}/api/annotations/video_a", data=body,
            headers={"Content-Type": "application/json"},
        )
        assert resp.status_code == 201
        back = requests.get(f"{base}/api/annotations/video_a")
        assert back.status_code == 200
        assert back.content == body  # stored verbatim, byte for byte

    def test_post_two_point_polygon_rejected_with_path(self, service):
        base, _ = service
        doc = valid_doc()
        doc["cells"][0]["polygon"] = [[0.0, 0.0], [1.0, 1.0]]
        resp = requests.post(f"{base}/api/annotations/video_a", json=doc)
        assert resp.status_code == 400
        detail = resp.json()
        assert detail["path"] == "cells[0].polygon"
        assert "at least 3" in detail["error"]

    def test_post_malformed_json(self, service):
        base, _ = service
        resp = requests.post(f"{base}/api/annotations/video_a", data=b"{not json")
        assert resp.status_code == 400
        assert "JSON" in resp.json()["error"]

    def test_post_writes_atomically_no_temp_left(self, service):
        base, annotations_dir = service
        requests.post(f"{base}/api/annotations/video_b", json=valid_doc())
        files = sorted(p.name for p in annotations_dir.iterdir())
        assert files == ["video_b.json"]

    def test_concurrent_posts_leave_valid_file(self, service):
        base, annotations_dir = service
        docs = []
        for i in range(8):
            doc = valid_doc()
            doc["source"] = f"writer_{i}"
            docs.append(json.dumps(doc).encode())

        def post(payload):
            requests.post(f"{base}/api/annotations/video_a", data=payload)

        threads = [threading.Thread(target=post, args=(d,)) for d in docs]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        stored = (annotations_dir / "video_a.json").read_bytes()
        assert stored in docs  # one complete write wins; never interleaved

    def test_invalid_video_id_rejected(self, service):
        base, _ = service
        resp = requests.post(f"{base}/api/annotations/..%2Fetc", json=valid_doc())
        assert resp.status_code in (400, 404)

    def test_unknown_endpoint(self, service):
        base, _ = service
        assert requests.get(f"{base}/api/nothing").status_code == 404


def test_missing_frames_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        make_server(tmp_path / "ghost", tmp_path / "ann", port=0)


def test_port_in_use_exit_1(tmp_path):
    from cellflow.cli import main

    frames = tmp_path / "frames"
    frames.mkdir()
    blocker = make_server(frames, tmp_path / "ann", port=0)
    try:
        port = blocker.server_address[1]
        assert main(["serve", str(frames), str(tmp_path / "ann2"), "--port", str(port)]) == 1
    finally:
        blocker.server_close()
