"""Local HTTP + JSON API for the reader study, plus static UI serving.

Endpoints:
  POST /sessions                      create a session
  GET  /sessions/{id}/next?reader=R   next unanswered item for a reader
  POST /sessions/{id}/responses       submit {reader_id, item_id, label}
  GET  /sessions/{id}/report?unblind= full report (unblind gates group labels)
  GET  /...                           static files for the browser UI

Session creation accepts image sets either as paths (IMGSET containers or
PGM directories, resolved against the data directory) or as inline base64
IMGSET blobs. Item images are served as base64 16-bit binary PGM payloads.

Configuration via flags or environment: GENFORGE_PORT, GENFORGE_DATA_DIR.
"""

from __future__ import annotations

import base64
import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .errors import (
    ConflictError,
    FormatError,
    InvalidInputError,
    InvalidStateError,
    NotFoundError,
)
from .imageset import ImageSet, PGM_MAXVAL, load_set, parse_imgset_bytes
from .study import SessionStore

DEFAULT_PORT = 8714


def _pgm_bytes(image: np.ndarray) -> bytes:
    quantized = np.clip(np.rint(image * PGM_MAXVAL), 0, PGM_MAXVAL).astype(">u2")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + quantized.tobytes()


def _decode_set_ref(ref, data_dir: Path) -> ImageSet:
    """Resolve a request's image-set reference: path or inline base64 IMGSET."""
    if not isinstance(ref, dict):
        raise InvalidInputError("image set reference must be an object")
    if "imgset_b64" in ref:
        raw = base64.b64decode(ref["imgset_b64"])
        return ImageSet(parse_imgset_bytes(raw, source="inline imgset payload"))
    if "path" in ref:
        path = Path(ref["path"])
        if not path.is_absolute():
            path = Path(data_dir) / path
        return load_set(path)
    raise InvalidInputError("image set reference needs 'path' or 'imgset_b64'")


class StudyService:
    """Request-independent core: the handler delegates here under a lock."""

    def __init__(self, data_dir, static_dir=None):
        self.store = SessionStore(data_dir)
        self.data_dir = Path(data_dir)
        self.static_dir = Path(static_dir) if static_dir else None
        self._lock = threading.Lock()

    def create_session(self, body: dict) -> dict:
        real = _decode_set_ref(body.get("real"), self.data_dir)
        fakes_ref = body.get("fakes")
        if not isinstance(fakes_ref, dict) or not fakes_ref:
            raise InvalidInputError("'fakes' must map group names to image set references")
        fakes = {name: _decode_set_ref(ref, self.data_dir) for name, ref in fakes_ref.items()}
        with self._lock:
            session = self.store.create(
                real,
                fakes,
                n_per_group=int(body.get("n_per_group", 50)),
                seed=int(body.get("seed", 0)),
                session_id=body.get("session_id"),
            )
        return {"session_id": session.session_id, "n_items": len(session.items)}

    def next_item(self, session_id: str, reader_id: str) -> dict:
        if not reader_id:
            raise InvalidInputError("query parameter 'reader' is required")
        with self._lock:
            session = self.store.get(session_id)
            item = session.next_item(reader_id)
            answered = session.answered(reader_id)
            total = len(session.items)
        if item is None:
            return {"done": True, "answered": answered, "total": total}
        return {
            "done": False,
            "item_id": item.item_id,
            "image_pgm_b64": base64.b64encode(_pgm_bytes(item.image)).decode(),
            "answered": answered,
            "total": total,
        }

    def record_response(self, session_id: str, body: dict) -> dict:
        for key in ("reader_id", "item_id", "label"):
            if key not in body:
                raise InvalidInputError(f"missing field {key!r}")
        with self._lock:
            self.store.record_response(
                session_id,
                body["reader_id"],
                body["item_id"],
                body["label"],
                overwrite=bool(body.get("overwrite", False)),
            )
            session = self.store.get(session_id)
            answered = session.answered(body["reader_id"])
        return {"ok": True, "answered": answered, "total": len(session.items)}

    def report(self, session_id: str, unblind: bool) -> dict:
        with self._lock:
            return self.store.export_report(session_id, unblind)


class _Handler(BaseHTTPRequestHandler):
    service: StudyService  # set by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, exc: Exception) -> None:
        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, ConflictError):
            status = 409
        elif isinstance(exc, (InvalidInputError, FormatError, InvalidStateError, json.JSONDecodeError)):
            status = 400
        message = str(exc)
        if isinstance(exc, NotFoundError) and exc.args:
            message = f"not found: {exc.args[0]}"
        self._send_json({"error": {"type": type(exc).__name__, "message": message}}, status)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        body = json.loads(raw.decode() or "{}")
        if not isinstance(body, dict):
            raise InvalidInputError("request body must be a JSON object")
        return body

    def do_POST(self):
        try:
            parts = [p for p in urlparse(self.path).path.split("/") if p]
            body = self._read_body()
            if parts == ["sessions"]:
                self._send_json(self.service.create_session(body), 201)
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "responses":
                self._send_json(self.service.record_response(parts[1], body), 201)
            else:
                self._send_json({"error": {"type": "NotFound", "message": self.path}}, 404)
        except Exception as exc:  # all errors become machine-readable JSON
            self._send_error_json(exc)

    def do_GET(self):
        try:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            query = parse_qs(url.query)
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "next":
                reader = query.get("reader", [""])[0]
                self._send_json(self.service.next_item(parts[1], reader))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "report":
                unblind = query.get("unblind", ["false"])[0].lower() in ("1", "true", "yes")
                self._send_json(self.service.report(parts[1], unblind))
            elif parts == ["sessions"]:
                self._send_json({"sessions": self.service.store.list_ids()})
            else:
                self._serve_static(url.path)
        except Exception as exc:
            self._send_error_json(exc)

    def _serve_static(self, path: str) -> None:
        root = self.service.static_dir
        if root is None:
            self._send_json({"error": {"type": "NotFound", "message": "no static dir configured"}}, 404)
            return
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        try:
            target.relative_to(root.resolve())
        except ValueError:
            self._send_json({"error": {"type": "NotFound", "message": path}}, 404)
            return
        if not target.is_file():
            self._send_json({"error": {"type": "NotFound", "message": path}}, 404)
            return
        content = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(content)))
        self.end_headers()
        self.wfile.write(content)


def make_server(data_dir, port: int = 0, static_dir=None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    service = StudyService(data_dir, static_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(data_dir, port: int = DEFAULT_PORT, static_dir=None) -> None:
    server = make_server(data_dir, port, static_dir)
    host, bound_port = server.server_address[:2]
    print(f"study service listening on http://{host}:{bound_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
