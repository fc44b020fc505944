"""Local HTTP service backing the browser annotation tool.

Endpoints (JSON over HTTP/1.1):

    GET  /api/videos                    -> [{id, frame_count, width, height}]
    GET  /api/videos/{id}/frames/{k}    -> PNG bytes
    GET  /api/annotations/{id}          -> stored annotation JSON (404 if absent)
    POST /api/annotations/{id}          -> validate, persist, 201
    GET  /api/config                    -> {px_per_micron, contrast_cutoff}

A video is a subdirectory of the frames directory holding lexicographically
ordered PNG frames.  Annotation writes go through a temp file and an atomic
rename, serialized per video id, so a crash can never leave a half-written
file; the posted bytes are stored verbatim, making save/load a byte-exact
round trip.  Single-researcher tool: no auth, permissive CORS.
"""

from __future__ import annotations

import json
import re
import threading
from collections import defaultdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from PIL import Image

from .annotations import validate_annotation_json
from .errors import AnnotationSchemaError

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

_ROUTE_FRAME = re.compile(r"^/api/videos/([^/]+)/frames/(\d+)$")
_ROUTE_ANNOTATION = re.compile(r"^/api/annotations/([^/]+)$")


class AnnotationServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, frames_dir, annotations_dir,
                 px_per_micron: float = 1.1939, contrast_cutoff: float = 0.04):
        self.frames_dir = Path(frames_dir)
        self.annotations_dir = Path(annotations_dir)
        self.px_per_micron = px_per_micron
        self.contrast_cutoff = contrast_cutoff
        self._write_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()
        super().__init__(address, _Handler)

    def write_lock(self, video_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._write_locks[video_id]

    def video_frames(self, video_id: str) -> list[Path]:
        if not _ID_RE.match(video_id):
            return []
        directory = self.frames_dir / video_id
        if not directory.is_dir():
            return []
        return sorted(directory.glob("*.png"))

    def list_videos(self) -> list[dict]:
        videos = []
        for directory in sorted(p for p in self.frames_dir.iterdir() if p.is_dir()):
            frames = sorted(directory.glob("*.png"))
            if not frames:
                continue
            with Image.open(frames[0]) as img:
                width, height = img.size
            videos.append(
                {
                    "id": directory.name,
                    "frame_count": len(frames),
                    "width": width,
                    "height": height,
                }
            )
        return videos

    def annotation_path(self, video_id: str) -> Path:
        return self.annotations_dir / f"{video_id}.json"


class _Handler(BaseHTTPRequestHandler):
    server: AnnotationServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload):
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

    def _send_error_json(self, status: int, message: str, json_path: str | None = None):
        payload = {"error": message}
        if json_path is not None:
            payload["path"] = json_path
        self._send_json(status, payload)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/api/videos":
            self._send_json(200, self.server.list_videos())
            return
        if self.path == "/api/config":
            self._send_json(
                200,
                {
                    "px_per_micron": self.server.px_per_micron,
                    "contrast_cutoff": self.server.contrast_cutoff,
                },
            )
            return
        frame_match = _ROUTE_FRAME.match(self.path)
        if frame_match:
            video_id, index = frame_match.group(1), int(frame_match.group(2))
            frames = self.server.video_frames(video_id)
            if not frames:
                self._send_error_json(404, f"unknown video {video_id!r}")
                return
            if index >= len(frames):
                self._send_error_json(404, f"frame {index} out of range (0..{len(frames) - 1})")
                return
            self._send(200, frames[index].read_bytes(), "image/png")
            return
        ann_match = _ROUTE_ANNOTATION.match(self.path)
        if ann_match:
            video_id = ann_match.group(1)
            if not _ID_RE.match(video_id):
                self._send_error_json(400, f"invalid video id {video_id!r}")
                return
            path = self.server.annotation_path(video_id)
            if not path.is_file():
                self._send_error_json(404, f"no annotations for {video_id!r}")
                return
            self._send(200, path.read_bytes(), "application/json")
            return
        self._send_error_json(404, f"no such endpoint: {self.path}")

    def do_POST(self):
        ann_match = _ROUTE_ANNOTATION.match(self.path)
        if not ann_match:
            self._send_error_json(404, f"no such endpoint: {self.path}")
            return
        video_id = ann_match.group(1)
        if not _ID_RE.match(video_id):
            self._send_error_json(400, f"invalid video id {video_id!r}")
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        try:
            doc = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send_error_json(400, f"body is not valid JSON: {exc}")
            return
        try:
            validate_annotation_json(doc)
        except AnnotationSchemaError as exc:
            self._send_error_json(400, str(exc), json_path=exc.json_path)
            return

        path = self.server.annotation_path(video_id)
        with self.server.write_lock(video_id):
            tmp = path.with_name(path.name + f".tmp-{threading.get_ident()}")
            tmp.write_bytes(body)
            tmp.replace(path)
        self._send_json(201, {"status": "created", "id": video_id})


def make_server(frames_dir, annotations_dir, port: int = 0, host: str = "127.0.0.1",
                px_per_micron: float = 1.1939,
                contrast_cutoff: float = 0.04) -> AnnotationServer:
    """Bind (but do not start) the service; port 0 picks a free port."""
    frames_dir = Path(frames_dir)
    annotations_dir = Path(annotations_dir)
    if not frames_dir.is_dir():
        raise FileNotFoundError(f"frames directory not found: {frames_dir}")
    annotations_dir.mkdir(parents=True, exist_ok=True)
    return AnnotationServer(
        (host, port), frames_dir, annotations_dir,
        px_per_micron=px_per_micron, contrast_cutoff=contrast_cutoff,
    )
