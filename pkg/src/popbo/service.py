"""HTTP/JSON session service for live preference sessions.

One optimizer session per session id, all mutations serialized by a
per-session lock (conflicting writers are rejected with 409, never
queued).  Every observed preference is checkpointed to disk, so a
restarted service resumes each session exactly where it stopped.

Protocol (all JSON, versioned under /v1):

    POST /v1/sessions {config}                 -> {"session_id": id}
    GET  /v1/sessions/{id}/duel                -> {t, x, x_prime, labels}
    POST /v1/sessions/{id}/preference {pref}   -> {t, report: {...}}
    GET  /v1/sessions/{id}/report              -> {t_star, x, radius, max_mle_point}
    GET  /v1/sessions/{id}/trace               -> full trace document
"""

from __future__ import annotations

import json
import os
import re
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .engine import PopBoConfig, ProtocolError, SessionState


def placement_bit(seed: int, t: int) -> int:
    """Deterministic left/right card placement for step t.

    Kept to 32-bit integer operations so browser clients reproduce it
    exactly (Math.imul semantics).
    """
    mixed = (((seed & 0xFFFFFFFF) + t) * 2654435761) & 0xFFFFFFFF
    return mixed & 1


class SessionStore:
    """Thread-safe registry of sessions with disk checkpoints."""

    def __init__(self, checkpoint_dir: str | None = None):
        self.checkpoint_dir = checkpoint_dir
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        if checkpoint_dir:
            os.makedirs(checkpoint_dir, exist_ok=True)
            for name in sorted(os.listdir(checkpoint_dir)):
                if name.endswith(".json"):
                    sid = name[: -len(".json")]
                    with open(os.path.join(checkpoint_dir, name)) as fh:
                        self._sessions[sid] = SessionState.from_checkpoint(json.load(fh))
                    self._locks[sid] = threading.Lock()

    def create(self, config: PopBoConfig) -> str:
        sid = uuid.uuid4().hex
        with self._registry_lock:
            self._sessions[sid] = SessionState(config=config)
            self._locks[sid] = threading.Lock()
        self.persist(sid)
        return sid

    def get(self, sid: str) -> tuple[SessionState, threading.Lock]:
        with self._registry_lock:
            if sid not in self._sessions:
                raise KeyError(sid)
            return self._sessions[sid], self._locks[sid]

    def persist(self, sid: str) -> None:
        if not self.checkpoint_dir:
            return
        state = self._sessions[sid]
        path = os.path.join(self.checkpoint_dir, f"{sid}.json")
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(state.checkpoint_json())
        os.replace(tmp, path)


def _duel_payload(state: SessionState, sid: str) -> dict:
    p = state.pending
    step = state.t + 1
    return {
        "session_id": sid,
        "t": step,
        "x": p.x.tolist(),
        "x_prime": p.x_ref.tolist(),
        "labels": state.config.labels,
        "placement_left_is_query": bool(placement_bit(state.config.seed, step)),
    }


def _report_payload(state: SessionState) -> dict:
    idx, x = state.report_t_star()
    return {
        "t_star": idx,
        "x": x.tolist(),
        "radius": state.radius_trace[idx - 1],
    }


def _trace_payload(state: SessionState, sid: str) -> dict:
    seed = state.config.seed
    doc = {
        "session_id": sid,
        "t": state.t,
        "config": state.config.to_json(),
        "norm_bound_current": state.B,
        "queries": [q.tolist() for q in state.queries],
        "references": [r.x_prime.tolist() for r in state.history.records],
        "prefs": [r.pref for r in state.history.records],
        "sigmas": state.sigma_trace,
        "radii": state.radius_trace,
        "mle_objectives": state.mle_trace,
        "placements_left_is_query": [bool(placement_bit(seed, t)) for t in range(1, state.t + 1)],
        "t_star": state.report_t_star()[0] if state.t >= 1 else None,
        "pending": None
        if state.pending is None
        else {
            "t": state.t + 1,
            "x": state.pending.x.tolist(),
            "x_prime": state.pending.x_ref.tolist(),
            "placement_left_is_query": bool(placement_bit(seed, state.t + 1)),
        },
    }
    return doc


_SESSION_ROUTE = re.compile(r"^/v1/sessions/([0-9a-f]+)/(duel|preference|report|trace)$")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    server_version = "popbo/0.1"
    store: SessionStore = None
    static_dir: str | None = None

    # -- plumbing ------------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("POPBO_SERVICE_LOG"):
            super().log_message(fmt, *args)

    def _send_json(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, message: str) -> None:
        self._send_json(code, {"error": message})

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        try:
            obj = json.loads(raw or b"{}")
        except json.JSONDecodeError:
            raise ValueError("request body is not valid JSON")
        if not isinstance(obj, dict):
            raise ValueError("request body must be a JSON object")
        return obj

    def do_OPTIONS(self):
        self._send_json(204, {})

    # -- static frontend -------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        if not self.static_dir:
            self._error(404, "no static assets configured")
            return
        rel = "index.html" if path in ("/", "") else path.lstrip("/")
        full = os.path.realpath(os.path.join(self.static_dir, rel))
        root = os.path.realpath(self.static_dir)
        if not full.startswith(root + os.sep) and full != root:
            self._error(404, "not found")
            return
        if not os.path.isfile(full):
            self._error(404, "not found")
            return
        ext = os.path.splitext(full)[1]
        body = open(full, "rb").read()
        self.send_response(200)
        self.send_header("Content-Type", _CONTENT_TYPES.get(ext, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        m = _SESSION_ROUTE.match(self.path)
        if not m:
            self._serve_static(self.path)
            return
        sid, action = m.groups()
        try:
            state, lock = self.store.get(sid)
        except KeyError:
            self._error(404, f"unknown session {sid}")
            return
        with lock:
            try:
                if action == "duel":
                    if state.pending is None:
                        state.next_query()
                        self.store.persist(sid)
                    self._send_json(200, _duel_payload(state, sid))
                elif action == "report":
                    if state.t < 1:
                        self._error(409, "no resolved duels yet")
                        return
                    payload = _report_payload(state)
                    payload["max_mle_point"] = state.report_max_mle().tolist()
                    self._send_json(200, payload)
                elif action == "trace":
                    self._send_json(200, _trace_payload(state, sid))
                else:
                    self._error(405, "preference requires POST")
            except ProtocolError as exc:
                self._error(409, str(exc))

    def do_POST(self):
        if self.path == "/v1/sessions":
            try:
                body = self._read_body()
                config = PopBoConfig.from_json(body)
            except (ValueError, KeyError, TypeError) as exc:
                self._error(400, f"bad session config: {exc}")
                return
            sid = self.store.create(config)
            self._send_json(200, {"session_id": sid})
            return
        m = _SESSION_ROUTE.match(self.path)
        if not m or m.group(2) != "preference":
            self._error(404, "not found")
            return
        sid = m.group(1)
        try:
            state, lock = self.store.get(sid)
        except KeyError:
            self._error(404, f"unknown session {sid}")
            return
        if not lock.acquire(blocking=False):
            self._error(409, "session is busy with another mutation")
            return
        try:
            try:
                body = self._read_body()
            except ValueError as exc:
                self._error(400, str(exc))
                return
            pref = body.get("pref")
            if pref not in (0, 1):
                self._error(400, "pref must be 0 or 1")
                return
            if state.pending is None:
                self._error(409, "no pending duel awaits a preference")
                return
            state.observe(int(pref))
            self.store.persist(sid)
            self._send_json(200, {"t": state.t, "report": _report_payload(state)})
        finally:
            lock.release()


def make_server(
    port: int,
    checkpoint_dir: str | None = None,
    static_dir: str | None = None,
    host: str = "127.0.0.1",
) -> ThreadingHTTPServer:
    handler = type(
        "PopBoHandler",
        (_Handler,),
        {"store": SessionStore(checkpoint_dir), "static_dir": static_dir},
    )
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_forever(port: int, checkpoint_dir=None, static_dir=None, host="127.0.0.1") -> None:
    server = make_server(port, checkpoint_dir, static_dir, host)
    print(f"serving on http://{host}:{server.server_address[1]} "
          f"(checkpoints: {checkpoint_dir or 'off'})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
