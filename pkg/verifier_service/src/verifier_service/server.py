"""HTTP scoring service.

  GET  /info   -> {"scorer_id", "trained_on_folds", "mode"}
  POST /score  -> {"prob": float in [0, 1]}
                  body {"context": str, "claim": str, "fold": int (optional)}

Malformed requests get a 400 with an error message; probabilities are clamped
to [0, 1] defensively before they leave the service.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class ScorerServer:
    def __init__(self, scorer, host: str = "127.0.0.1", port: int = 0):
        outer_scorer = scorer

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, obj, status=200):
                body = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):  # noqa: N802
                if self.path == "/info":
                    return self._send(outer_scorer.info())
                return self._send({"error": f"no such endpoint: {self.path}"}, 404)

            def do_POST(self):  # noqa: N802
                if self.path != "/score":
                    return self._send({"error": f"no such endpoint: {self.path}"}, 404)
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    payload = json.loads(self.rfile.read(length) or b"")
                except (ValueError, json.JSONDecodeError):
                    return self._send({"error": "body must be JSON"}, 400)
                context = payload.get("context")
                claim = payload.get("claim")
                if not isinstance(context, str) or not isinstance(claim, str):
                    return self._send(
                        {"error": "'context' and 'claim' must be strings"}, 400
                    )
                fold = payload.get("fold")
                prob = outer_scorer.score(context, claim, fold)
                prob = min(1.0, max(0.0, float(prob)))
                return self._send({"prob": prob})

        try:
            self._server = ThreadingHTTPServer((host, port), Handler)
        except OSError as exc:
            raise RuntimeError(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[0], self._server.server_address[1]
        return f"http://{host}:{port}"

    def start(self) -> "ScorerServer":
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
