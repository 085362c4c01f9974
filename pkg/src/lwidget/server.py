"""HTTP server exposing load / event / snapshot operations over JSON.

One POST endpoint takes a JSON request with an "op" field:

  {"op": "load", "source": "...", "horizon": 16, "entry": "main"?}
      -> {"ok": {"session": "...", "entry": "...", "horizon": 16,
                 "types": {...}, "snapshot": {...}}}
  {"op": "event", "session": "...", "t": 2, "widget": 0,
   "kind": "click" | "keypress", "char": "a"?}
      -> {"ok": {"snapshot": {...}}}
  {"op": "snapshot", "session": "...", "t": 3?}
      -> {"snapshot": {"widgets": [{"id": 0, "color": "Red",
                                    "handlers": ["click"], "children": []}],
                       ...}}

Errors come back as {"error": "<kind>", "message": "..."} with HTTP status
200 for domain errors (bad program, bad stimulus) and 400 for requests that
are not understood at all. Session state only advances when an event is
accepted; rejected stimuli leave the session untouched.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from . import parser, runtime, semantics, typecheck
from .errors import CompatError, HorizonExceeded, LwError, LwSyntaxError, TraceTargetInvalid
from .pretty import pp_type
from .semantics import Stimulus, rename_ids, value_to_json


def _err(kind: str, message: str, **extra) -> dict:
    return {"error": kind, "message": message, **extra}


@dataclass
class Session:
    program: object
    entry: str
    horizon: int
    stimuli: list[Stimulus] = field(default_factory=list)


class PlaygroundState:
    def __init__(self) -> None:
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    # -- operations -----------------------------------------------------------

    def handle(self, doc: dict) -> dict:
        op = doc.get("op")
        if op == "load":
            return self._load(doc)
        if op == "event":
            return self._event(doc)
        if op == "snapshot":
            return self._snapshot(doc)
        return _err("BadRequest", f"unknown op {op!r}")

    def _load(self, doc: dict) -> dict:
        source = doc.get("source")
        horizon = doc.get("horizon", 16)
        if not isinstance(source, str) or not isinstance(horizon, int) or horizon < 0:
            return _err("BadRequest", "load needs 'source' (string) and 'horizon' (int)")
        try:
            prog = parser.desugar(parser.parse(source))
        except LwSyntaxError as e:
            return _err("SyntaxError", e.message, line=e.span.line, col=e.span.col)
        result = typecheck.check_program(prog)
        if not result.ok:
            first = result.errors[0]
            return _err(
                first.kind,
                first.message,
                line=first.span.line,
                col=first.span.col,
                all=[e.to_record("<source>") for e in result.errors],
            )
        entry = doc.get("entry") or prog.entry
        if not any(d.name == entry for d in prog.definitions):
            return _err("BadRequest", f"no definition named {entry!r}")
        session = Session(result.program, entry, horizon)
        sid = uuid.uuid4().hex
        with self.lock:
            self.sessions[sid] = session
        snap = _snapshot_of(session)
        if "error" in snap:
            return snap
        return {
            "ok": {
                "session": sid,
                "entry": entry,
                "horizon": horizon,
                "types": {name: pp_type(ty) for name, ty in result.types.items()},
                "snapshot": snap["snapshot"],
            }
        }

    def _get(self, doc: dict) -> Session | dict:
        sid = doc.get("session")
        with self.lock:
            session = self.sessions.get(sid)
        if session is None:
            return _err("BadRequest", "unknown or missing session")
        return session

    def _event(self, doc: dict) -> dict:
        session = self._get(doc)
        if isinstance(session, dict):
            return session
        record = {k: v for k, v in doc.items() if k in ("t", "widget", "kind", "char")}
        try:
            last = session.stimuli[-1].t if session.stimuli else None
            stims = runtime.parse_trace([json.dumps(record)])
            if last is not None and stims[0].t < last:
                raise TraceTargetInvalid(
                    f"event at t={stims[0].t} precedes the last accepted event at t={last}"
                )
        except TraceTargetInvalid as e:
            return _err("TraceTargetInvalid", str(e))
        candidate = session.stimuli + stims
        snap = _snapshot_of(session, candidate)
        if "error" in snap:
            return snap  # reject the stimulus; session state is unchanged
        session.stimuli = candidate
        return {"ok": {"snapshot": snap["snapshot"]}}

    def _snapshot(self, doc: dict) -> dict:
        session = self._get(doc)
        if isinstance(session, dict):
            return session
        t = doc.get("t")
        if t is not None and not isinstance(t, int):
            return _err("BadRequest", "'t' must be an integer")
        return _snapshot_of(session, t=t)


def _snapshot_of(session: Session, stimuli: Optional[list[Stimulus]] = None, t: Optional[int] = None) -> dict:
    stims = session.stimuli if stimuli is None else stimuli
    try:
        result = runtime.run(session.program, session.horizon, list(stims), entry=session.entry)
    except TraceTargetInvalid as e:
        return _err("TraceTargetInvalid", str(e))
    except CompatError as e:
        return _err("IncompatibleCommands", str(e))
    except HorizonExceeded as e:
        return _err("HorizonExceeded", str(e))
    render_at = t if t is not None else session.horizon
    return {
        "snapshot": {
            "widgets": semantics.widget_snapshots(result.value, render_at),
            "t": render_at,
            "value": rename_ids(value_to_json(result.value)),
            "trace": [s.to_json() for s in stims],
            "steps": result.steps,
            "horizon": session.horizon,
        }
    }


class _Handler(BaseHTTPRequestHandler):
    state: PlaygroundState  # set by make_server

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw)
            if not isinstance(doc, dict):
                raise ValueError("expected a JSON object")
        except (json.JSONDecodeError, ValueError) as e:
            self._reply(400, _err("BadRequest", str(e)))
            return
        try:
            out = self.state.handle(doc)
        except LwError as e:
            out = _err(type(e).__name__, str(e))
        self._reply(200, out)

    def do_GET(self) -> None:  # noqa: N802
        self._reply(200, {"ok": {"service": "lwidget-playground", "ops": ["load", "event", "snapshot"]}})

    def _reply(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:  # noqa: N802
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass


def make_server(host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    state = PlaygroundState()
    handler = type("Handler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(host: str = "127.0.0.1", port: int = 8787) -> None:
    server = make_server(host, port)
    print(
        f"listening on http://{server.server_address[0]}:{server.server_address[1]}",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
