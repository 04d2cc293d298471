"""HTTP API over a run record: annotation queue for the human oracle.

Endpoints (all JSON):
  GET  /api/cases?status=pending|all          annotation queue
  GET  /api/cases/{id}                        attributes + rounds + points
  POST /api/cases/{id}/rounds/{r}/points/{i}/annotation
                                              body {"hallucinated": 0|1, "annotator": "..."}
  GET  /api/progress                          {"annotated": n, "total": m}

Static files (the browser UI) are served from an optional directory at "/".
Annotation writes append to the run's annotations.jsonl and update the
in-memory index under one lock, so a GET issued after a POST always reflects
it. An optional static bearer token protects the API.
"""
from __future__ import annotations

import json
import re
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from ..exceptions import StartupError
from ..feedback import AnnotationRecord
from ..parser import Generation
from .store import ARM_INITIAL, RunStore

_ANNOTATION_PATH = re.compile(
    r"^/api/cases/(?P<case_id>[^/]+)/rounds/(?P<round>\d+)/points/(?P<index>\d+)/annotation$"
)

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".png": "image/png",
}


class AnnotationState:
    """In-memory view of the run record, kept consistent with the store."""

    def __init__(self, store: RunStore, display_arm: Optional[str] = None):
        self.store = store
        self.lock = threading.Lock()
        self.case_order: list[str] = []
        self.attributes: dict[str, dict[str, str]] = {}
        self.rounds: dict[str, dict[int, Generation]] = {}
        # (case_id, round, point_index) -> latest annotation dict
        self.annotations: dict[tuple[str, int, int], dict] = {}
        self._load(display_arm)

    def _load(self, display_arm: Optional[str]) -> None:
        for case in self.store.load_cases():
            self.case_order.append(case.id)
            self.attributes[case.id] = case.attribute_dict()
            self.rounds[case.id] = {}
        arms = {ARM_INITIAL}
        if display_arm:
            arms.add(display_arm)
        for generation, arm in self.store.load_generations():
            if arm in arms and generation.case_id in self.rounds:
                self.rounds[generation.case_id][generation.round] = generation
        for record in self.store.load_annotations():
            key = (record.case_id, record.round, record.point_index)
            self.annotations[key] = {
                "hallucinated": record.hallucinated,
                "annotator": record.annotator,
            }

    # round 0 is the annotation target; later rounds are display-only
    def _round0_points(self) -> list[tuple[str, int]]:
        out = []
        for case_id in self.case_order:
            generation = self.rounds[case_id].get(0)
            if generation is not None:
                out.extend((case_id, p.index) for p in generation.points)
        return out

    def progress(self) -> dict:
        with self.lock:
            points = self._round0_points()
            annotated = sum(
                1 for case_id, index in points if (case_id, 0, index) in self.annotations
            )
            return {"annotated": annotated, "total": len(points)}

    def case_status(self, case_id: str) -> str:
        generation = self.rounds[case_id].get(0)
        if generation is None or not generation.points:
            return "empty"
        done = all(
            (case_id, 0, p.index) in self.annotations for p in generation.points
        )
        return "done" if done else "pending"

    def list_cases(self, status: Optional[str]) -> list[dict]:
        with self.lock:
            rows = []
            for case_id in self.case_order:
                case_status = self.case_status(case_id)
                if status == "pending" and case_status != "pending":
                    continue
                generation = self.rounds[case_id].get(0)
                total = len(generation.points) if generation else 0
                annotated = sum(
                    1
                    for p in (generation.points if generation else [])
                    if (case_id, 0, p.index) in self.annotations
                )
                rows.append(
                    {
                        "id": case_id,
                        "status": case_status,
                        "annotated": annotated,
                        "total": total,
                    }
                )
            return rows

    def case_view(self, case_id: str) -> Optional[dict]:
        with self.lock:
            if case_id not in self.attributes:
                return None
            rounds = []
            for round_index in sorted(self.rounds[case_id]):
                generation = self.rounds[case_id][round_index]
                points = []
                for p in generation.points:
                    point = {"index": p.index, "text": p.text}
                    annotation = self.annotations.get((case_id, round_index, p.index))
                    if annotation is not None:
                        point["annotation"] = annotation
                    points.append(point)
                rounds.append(
                    {"round": round_index, "decision": generation.decision, "points": points}
                )
            return {
                "id": case_id,
                "attributes": self.attributes[case_id],
                "rounds": rounds,
                "status": self.case_status(case_id),
            }

    def annotate(self, case_id: str, round_index: int, point_index: int,
                 hallucinated: int, annotator: str) -> Optional[str]:
        """Returns an error message, or None on success."""
        with self.lock:
            if case_id not in self.rounds:
                return f"unknown case {case_id!r}"
            generation = self.rounds[case_id].get(round_index)
            if generation is None:
                return f"case {case_id}: no round {round_index}"
            if point_index not in {p.index for p in generation.points}:
                return f"case {case_id} round {round_index}: no point {point_index}"
            record = AnnotationRecord(
                case_id=case_id,
                round=round_index,
                point_index=point_index,
                hallucinated=hallucinated,
                annotator=annotator,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            self.store.append_annotation(record)
            self.annotations[(case_id, round_index, point_index)] = {
                "hallucinated": hallucinated,
                "annotator": annotator,
            }
            return None


class _Handler(BaseHTTPRequestHandler):
    server_version = "factloop-annotate/0.1"
    state: AnnotationState
    token: Optional[str]
    static_dir: Optional[Path]

    # silence per-request stderr logging
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _send_json(self, obj, status: int = 200) -> None:
        body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, message: str, status: int) -> None:
        self._send_json({"error": message}, status=status)

    def _authorized(self) -> bool:
        if not self.token:
            return True
        header = self.headers.get("Authorization", "")
        return header == f"Bearer {self.token}"

    def do_GET(self):  # noqa: N802 - stdlib name
        parsed = urlparse(self.path)
        if parsed.path.startswith("/api/"):
            if not self._authorized():
                return self._error("missing or invalid bearer token", 401)
            return self._get_api(parsed)
        return self._get_static(parsed.path)

    def _get_api(self, parsed) -> None:
        if parsed.path == "/api/progress":
            return self._send_json(self.state.progress())
        if parsed.path == "/api/cases":
            query = parse_qs(parsed.query)
            status = query.get("status", [None])[0]
            return self._send_json({"cases": self.state.list_cases(status)})
        match = re.match(r"^/api/cases/([^/]+)$", parsed.path)
        if match:
            view = self.state.case_view(match.group(1))
            if view is None:
                return self._error(f"unknown case {match.group(1)!r}", 404)
            return self._send_json(view)
        return self._error(f"no such endpoint: {parsed.path}", 404)

    def do_POST(self):  # noqa: N802 - stdlib name
        parsed = urlparse(self.path)
        if not self._authorized():
            return self._error("missing or invalid bearer token", 401)
        match = _ANNOTATION_PATH.match(parsed.path)
        if not match:
            return self._error(f"no such endpoint: {parsed.path}", 404)
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            return self._error("body must be JSON", 400)
        hallucinated = payload.get("hallucinated")
        annotator = payload.get("annotator")
        if hallucinated not in (0, 1):
            return self._error("'hallucinated' must be 0 or 1", 400)
        if not annotator or not isinstance(annotator, str):
            return self._error("'annotator' must be a non-empty string", 400)
        error = self.state.annotate(
            case_id=match.group("case_id"),
            round_index=int(match.group("round")),
            point_index=int(match.group("index")),
            hallucinated=hallucinated,
            annotator=annotator,
        )
        if error is not None:
            return self._error(error, 404)
        view = self.state.case_view(match.group("case_id"))
        return self._send_json({"ok": True, "case": view})

    def _get_static(self, path: str) -> None:
        if self.static_dir is None:
            return self._error("no static assets configured", 404)
        relative = path.lstrip("/") or "index.html"
        target = (self.static_dir / relative).resolve()
        try:
            target.relative_to(self.static_dir.resolve())
        except ValueError:
            return self._error("path outside static root", 403)
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return self._error(f"not found: {path}", 404)
        body = target.read_bytes()
        self.send_response(200)
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class AnnotationServer:
    """Threaded HTTP server over a run directory."""

    def __init__(
        self,
        store: RunStore,
        host: str = "127.0.0.1",
        port: int = 8777,
        token: Optional[str] = None,
        static_dir: Optional[Path] = None,
        display_arm: Optional[str] = None,
    ):
        self.state = AnnotationState(store, display_arm=display_arm)
        handler = type(
            "BoundHandler",
            (_Handler,),
            {
                "state": self.state,
                "token": token,
                "static_dir": Path(static_dir) if static_dir else None,
            },
        )
        try:
            self._server = ThreadingHTTPServer((host, port), handler)
        except OSError as exc:
            raise StartupError(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[0], self._server.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "AnnotationServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
