from __future__ import annotations

import json
import threading
import urllib.request

import pytest

from lwidget.server import make_server

from conftest import read


@pytest.fixture(scope="module")
def server_url():
    srv = make_server()
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    host, port = srv.server_address[:2]
    yield f"http://{host}:{port}/"
    srv.shutdown()


def post(url: str, doc: dict) -> dict:
    req = urllib.request.Request(
        url, json.dumps(doc).encode(), {"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def load(url: str, source: str, horizon: int = 8, **kw) -> dict:
    return post(url, {"op": "load", "source": source, "horizon": horizon, **kw})


class TestLoad:
    def test_load_returns_session_types_and_snapshot(self, server_url):
        r = load(server_url, read("turn_red.lw"))
        ok = r["ok"]
        assert ok["session"]
        assert ok["entry"] == "turnRedOnClick"
        assert ok["types"]["turnRedOnClick"] == "forall (i : Id). Widget i -o Widget i"
        widgets = ok["snapshot"]["widgets"]
        assert widgets == [{"id": 0, "color": None, "handlers": ["click"], "children": []}]

    def test_syntax_error_reported_with_kind(self, server_url):
        r = load(server_url, "main : I = fn .;")
        assert r["error"] == "SyntaxError"
        assert r["line"] == 1

    def test_type_error_reported_with_kind(self, server_url):
        r = load(server_url, "main : I -o I\n  = fn u. ();")
        assert r["error"] == "LinearVariableUnused"

    def test_unknown_entry_rejected(self, server_url):
        r = load(server_url, read("turn_red.lw"), entry="nope")
        assert r["error"] == "BadRequest"


class TestEventAndSnapshot:
    def test_click_turns_widget_red(self, server_url):
        sid = load(server_url, read("turn_red.lw"))["ok"]["session"]
        r = post(server_url, {"op": "event", "session": sid, "t": 3, "widget": 0, "kind": "click"})
        widgets = r["ok"]["snapshot"]["widgets"]
        assert widgets[0]["color"] == "Red"

    def test_snapshot_at_time_before_click_shows_no_color(self, server_url):
        sid = load(server_url, read("turn_red.lw"))["ok"]["session"]
        post(server_url, {"op": "event", "session": sid, "t": 3, "widget": 0, "kind": "click"})
        before = post(server_url, {"op": "snapshot", "session": sid, "t": 2})
        after = post(server_url, {"op": "snapshot", "session": sid, "t": 3})
        assert before["snapshot"]["widgets"][0]["color"] is None
        assert after["snapshot"]["widgets"][0]["color"] == "Red"

    def test_unknown_widget_event_rejected_and_state_unchanged(self, server_url):
        sid = load(server_url, read("turn_red.lw"))["ok"]["session"]
        r = post(server_url, {"op": "event", "session": sid, "t": 1, "widget": 9, "kind": "click"})
        assert r["error"] == "TraceTargetInvalid"
        snap = post(server_url, {"op": "snapshot", "session": sid})
        assert snap["snapshot"]["trace"] == []

    def test_event_times_must_not_go_backwards(self, server_url):
        sid = load(server_url, read("turn_red.lw"))["ok"]["session"]
        post(server_url, {"op": "event", "session": sid, "t": 5, "widget": 0, "kind": "click"})
        r = post(server_url, {"op": "event", "session": sid, "t": 2, "widget": 0, "kind": "click"})
        assert r["error"] == "TraceTargetInvalid"

    def test_keypress_event(self, server_url):
        # The keypress wins the race, so the returned event carries Blue.
        sid = load(server_url, read("change_color.lw"))["ok"]["session"]
        r = post(server_url, {"op": "event", "session": sid, "t": 2, "widget": 0,
                              "kind": "keypress", "char": "a"})
        value = r["ok"]["snapshot"]["value"]
        event = value["pair"][1]["event"]
        assert event["at"] == 2
        assert event["value"]["inr"]["pair"][0] == {"F": "Blue"}

    def test_unknown_session_rejected(self, server_url):
        r = post(server_url, {"op": "snapshot", "session": "nope"})
        assert r["error"] == "BadRequest"

    def test_unknown_op_rejected(self, server_url):
        r = post(server_url, {"op": "dance"})
        assert r["error"] == "BadRequest"


class TestSessionIsolation:
    def test_sessions_do_not_share_state(self, server_url):
        sid1 = load(server_url, read("turn_red.lw"))["ok"]["session"]
        sid2 = load(server_url, read("turn_red.lw"))["ok"]["session"]
        assert sid1 != sid2
        post(server_url, {"op": "event", "session": sid1, "t": 2, "widget": 0, "kind": "click"})
        s1 = post(server_url, {"op": "snapshot", "session": sid1})
        s2 = post(server_url, {"op": "snapshot", "session": sid2})
        assert s1["snapshot"]["widgets"][0]["color"] == "Red"
        assert s2["snapshot"]["widgets"][0]["color"] is None

    def test_fresh_ids_are_independent_per_session(self, server_url):
        # Widget ids restart at 0 in every session.
        for _ in range(2):
            r = load(server_url, read("button_stack.lw"))
            ids = [w["id"] for w in r["ok"]["snapshot"]["widgets"]]
            assert 0 in ids
