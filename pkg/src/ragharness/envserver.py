"""Optional HTTP mode for the environment.

``POST /session`` opens a session (``{"fault_plan": [...]}`` optional) and
returns ``{"session": id}``; ``POST /invoke`` takes
``{"session", "tool", "arguments"}`` and answers ``{"text", "structured", "fault"}``;
``GET /tools`` lists the tool schemas.
"""

from __future__ import annotations

import json
import threading
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Iterable

from .environment import EnvSession, Observation, ToolCall, internal_fault, tools_for
from .knowledge import Domain, KnowledgeBase


class EnvServer:
    def __init__(self, kb: KnowledgeBase, host: str = "127.0.0.1", port: int = 0):
        self.kb = kb
        self.sessions: dict[str, EnvSession] = {}
        self._lock = threading.Lock()
        self._next = 0
        self.httpd = ThreadingHTTPServer((host, port), self._handler())
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def open(self, fault_plan: Iterable[int] = ()) -> str:
        with self._lock:
            self._next += 1
            sid = f"s{self._next}"
            self.sessions[sid] = EnvSession(self.kb, fault_plan)
        return sid

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def _send(self, status: int, body: Any):
                data = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                if self.path != "/tools":
                    return self._send(404, {"error": "not found"})
                self._send(200, [s.to_schema() for s in tools_for(server.kb.domain)])

            def do_POST(self):
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    body = json.loads(self.rfile.read(length) or b"{}")
                except (ValueError, json.JSONDecodeError):
                    return self._send(400, {"error": "body must be JSON"})
                if self.path == "/session":
                    return self._send(200, {"session": server.open(body.get("fault_plan") or ())})
                if self.path != "/invoke":
                    return self._send(404, {"error": "not found"})
                session = server.sessions.get(body.get("session", ""))
                if session is None:
                    return self._send(404, {"error": "unknown session"})
                with server._lock:
                    _, obs = session.call(body.get("tool"), body.get("arguments", {}))
                self._send(200, obs.to_dict())

        return Handler

    def start(self) -> "EnvServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def _post(url: str, body: dict, timeout: float) -> Any:
    req = urllib.request.Request(url, data=json.dumps(body).encode("utf-8"), method="POST")
    req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read())


class RemoteSession:
    """Client with the same surface as :class:`EnvSession` as seen by workflows."""

    def __init__(self, base_url: str, domain: Domain | str, fault_plan: Iterable[int] = (), timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.domain = Domain(domain)
        self.timeout = timeout
        self.call_log: list[tuple[ToolCall, Observation]] = []
        self.session_id = _post(f"{self.base_url}/session", {"fault_plan": list(fault_plan)}, timeout)["session"]

    def list_tools(self):
        return list(tools_for(self.domain))

    @property
    def next_ordinal(self) -> int:
        return len(self.call_log) + 1

    def call(self, tool: str, arguments: Any):
        call = ToolCall(tool, dict(arguments) if isinstance(arguments, dict) else {"__raw__": arguments}, self.next_ordinal)
        try:
            payload = _post(
                f"{self.base_url}/invoke",
                {"session": self.session_id, "tool": tool, "arguments": arguments},
                self.timeout,
            )
            obs = Observation.from_dict(payload)
        except (OSError, ValueError, KeyError) as exc:
            obs = internal_fault(f"remote environment failed: {exc}")
        self.call_log.append((call, obs))
        return call, obs

    def invoke(self, call: ToolCall) -> Observation:
        if call.ordinal != self.next_ordinal:
            raise ValueError(f"expected ordinal {self.next_ordinal}, got {call.ordinal}")
        return self.call(call.tool, call.arguments)[1]

