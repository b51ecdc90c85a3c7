"""HTTP front end for the mock knowledge-graph store.

POST /call with {"name": ..., "params": {...}} executes one registered
function and returns {"found": ..., "payload": ..., "provenance": [...]}.
Unknown functions and invalid parameters are absence, not errors: the
response is found=false with a validation note. Only malformed requests
get a 4xx.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .kg import FunctionRegistry, KgFunctionCall, KgStore, execute_call

logger = logging.getLogger(__name__)


def make_server(store: KgStore, registry: FunctionRegistry, host: str, port: int) -> ThreadingHTTPServer:
    """Bind a threaded server; port 0 picks an ephemeral port."""

    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self) -> None:  # noqa: N802 - http.server interface
            if self.path != "/call":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            try:
                request = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"malformed request body: {exc}"})
                return
            if not isinstance(request, dict) or not isinstance(request.get("name"), str):
                self._send(400, {"error": "request must be an object with a 'name' string"})
                return
            params = request.get("params") or {}
            if not isinstance(params, dict):
                self._send(400, {"error": "'params' must be an object"})
                return
            call = KgFunctionCall(name=request["name"], params={str(k): str(v) for k, v in params.items()})
            note = registry.validate_call(call)
            if note is not None:
                logger.info("kg call rejected: %s", note)
                self._send(200, {"found": False, "payload": None, "provenance": [], "note": note})
                return
            result = execute_call(store, call, registry)
            logger.info("kg call %s(%s) -> found=%s", call.name, call.params, result.found)
            self._send(
                200,
                {
                    "found": result.found,
                    "payload": result.payload,
                    "provenance": list(result.provenance),
                },
            )

        def do_GET(self) -> None:  # noqa: N802 - http.server interface
            self._send(404, {"error": "POST /call is the only endpoint"})

        def log_message(self, fmt: str, *args) -> None:
            logger.debug("kg-serve %s", fmt % args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_forever(store: KgStore, registry: FunctionRegistry, host: str, port: int) -> None:
    server = make_server(store, registry, host, port)
    logger.info("mock KG service listening on %s:%s", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()
