"""Gateway HTTP surface: session lifecycle, posting, streaming, admin boundaries."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from teamline.gateway import ADMIN_TOKEN_ENV, SessionManager, create_app

TOKEN = "sekrit-token"
ADMIN = {"Authorization": f"Bearer {TOKEN}"}


def config_dict(quiescence_s=30.0, with_human=True):
    agents = [{"name": "Ada", "role_name": "Developer",
               "persona": "You are Ada."}]
    if with_human:
        agents.append({"name": "Ben", "role_name": "Client",
                       "is_scripted_human": True})
    return {
        "condition_name": "gatewaytest",
        "seed": 5,
        "pause_range_s": [0.05, 0.1],
        "knowledge": {"base": "Work together."},
        "agents": agents,
        "providers": {"default": {"type": "scripted", "script": [],
                                  "fallback_response": "ACTION: NONE"}},
        "termination": {"require_code_file": False, "none_streak": 2,
                        "quiescence_s": quiescence_s},
    }


@pytest.fixture
def manager():
    m = SessionManager()
    yield m
    m.stop_all()


@pytest.fixture
def client(manager, monkeypatch):
    monkeypatch.setenv(ADMIN_TOKEN_ENV, TOKEN)
    with TestClient(create_app(manager)) as c:
        yield c


def start_session(client, **kwargs):
    resp = client.post("/sessions", json={"config": config_dict(**kwargs)},
                       headers=ADMIN)
    assert resp.status_code == 201, resp.text
    return resp.json()["id"]


def wait_for(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.05)
    return False


class TestSessionLifecycle:
    def test_create_requires_admin_token(self, client, monkeypatch):
        body = {"config": config_dict()}
        assert client.post("/sessions", json=body).status_code == 401
        bad = {"Authorization": "Bearer wrong"}
        assert client.post("/sessions", json=body, headers=bad).status_code == 401
        monkeypatch.delenv(ADMIN_TOKEN_ENV)
        # with no token configured even the right header is refused
        assert client.post("/sessions", json=body, headers=ADMIN).status_code == 401

    def test_create_and_list(self, client, manager):
        session_id = start_session(client)
        listed = client.get("/sessions").json()["sessions"]
        assert [s["id"] for s in listed] == [session_id]
        assert listed[0]["condition_name"] == "gatewaytest"
        # served sessions always run on the wall clock
        assert manager.get(session_id).config.clock_mode == "real"

    def test_create_rejects_bad_config(self, client):
        resp = client.post("/sessions", json={"config": {"agents": []}},
                           headers=ADMIN)
        assert resp.status_code == 422
        resp = client.post("/sessions", json={}, headers=ADMIN)
        assert resp.status_code == 422

    def test_create_rejects_unknown_asset(self, client):
        resp = client.post("/sessions", json={"config_asset": "no_such_asset"},
                           headers=ADMIN)
        assert resp.status_code == 422

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/nope/events").status_code == 404
        assert client.post("/sessions/nope/messages",
                           json={"author": "Ben", "text": "x"}).status_code == 404

    def test_stop_is_admin_only(self, client):
        session_id = start_session(client)
        assert client.post(f"/sessions/{session_id}/stop").status_code == 401
        resp = client.post(f"/sessions/{session_id}/stop", headers=ADMIN)
        assert resp.status_code == 200
        assert resp.json()["status"] == "ended"
        resp = client.post(f"/sessions/{session_id}/messages",
                           json={"author": "Ben", "text": "too late"})
        assert resp.status_code == 409


class TestEventsAndMessages:
    def test_events_endpoint(self, client):
        session_id = start_session(client)
        data = client.get(f"/sessions/{session_id}/events").json()
        assert data["status"] == "running"
        assert data["head"] >= 2
        kinds = [e["kind"] for e in data["events"]]
        assert kinds[:2] == ["join", "join"]
        assert data["events"][0]["seq"] == 1

        since = data["head"]
        tail = client.get(f"/sessions/{session_id}/events",
                          params={"since": since}).json()
        assert all(e["seq"] > since for e in tail["events"])

    def test_events_bad_cursor(self, client):
        session_id = start_session(client)
        resp = client.get(f"/sessions/{session_id}/events",
                          params={"since": 10_000})
        assert resp.status_code == 422

    def test_human_message_round_trips_into_agent_prompt(self, client, manager):
        session_id = start_session(client)
        resp = client.post(f"/sessions/{session_id}/messages",
                           json={"author": "Ben", "text": "hello crew"})
        assert resp.status_code == 201
        assert resp.json()["payload"]["text"] == "hello crew"

        events = client.get(f"/sessions/{session_id}/events").json()["events"]
        assert any(e["kind"] == "message"
                   and e["payload"]["text"] == "hello crew" for e in events)

        provider = manager.get(session_id).runtimes["Ada"].provider
        assert wait_for(lambda: any(
            "Ben (Client): hello crew" in r.rendered_text()
            for r in provider.request_log))

    def test_message_validation(self, client):
        session_id = start_session(client)
        as_ai = client.post(f"/sessions/{session_id}/messages",
                            json={"author": "Ada", "text": "impersonation"})
        assert as_ai.status_code == 403
        unknown = client.post(f"/sessions/{session_id}/messages",
                              json={"author": "Ghost", "text": "boo"})
        assert unknown.status_code == 403
        empty = client.post(f"/sessions/{session_id}/messages",
                            json={"author": "Ben", "text": ""})
        assert empty.status_code == 422

    def test_typing_endpoint(self, client):
        session_id = start_session(client)
        resp = client.post(f"/sessions/{session_id}/typing",
                           json={"author": "Ben"})
        assert resp.status_code == 201
        assert resp.json()["kind"] == "typing_started"
        as_ai = client.post(f"/sessions/{session_id}/typing",
                            json={"author": "Ada"})
        assert as_ai.status_code == 403

    def test_report_endpoint(self, client):
        session_id = start_session(client)
        client.post(f"/sessions/{session_id}/messages",
                    json={"author": "Ben", "text": "one message"})
        report = client.get(f"/sessions/{session_id}/report").json()
        assert report["status"] == "running"
        assert report["turns"] >= 1
        assert report["messages_by_author"].get("Ben") == 1
        assert report["files"] == []


class TestAgentsEndpoints:
    def test_roster_hides_kind_from_non_admin(self, client):
        session_id = start_session(client)
        roster = client.get(f"/sessions/{session_id}/agents").json()["agents"]
        assert {a["name"] for a in roster} == {"Ada", "Ben"}
        assert all("kind" not in a for a in roster)

        admin_roster = client.get(f"/sessions/{session_id}/agents",
                                  headers=ADMIN).json()["agents"]
        kinds = {a["name"]: a["kind"] for a in admin_roster}
        assert kinds == {"Ada": "ai", "Ben": "human"}

    def test_add_agent(self, client, manager):
        session_id = start_session(client)
        resp = client.post(f"/sessions/{session_id}/agents",
                           json={"name": "Zia", "role_name": "Tester",
                                 "persona": "You are Zia."},
                           headers=ADMIN)
        assert resp.status_code == 201
        assert resp.json()["kind"] == "join"
        session = manager.get(session_id)
        assert "Zia" in session.runtimes
        assert session.runtimes["Zia"].join_seq == resp.json()["seq"]

    def test_add_agent_errors(self, client):
        session_id = start_session(client)
        body = {"name": "Ada", "role_name": "Developer", "persona": "again"}
        assert client.post(f"/sessions/{session_id}/agents", json=body,
                           headers=ADMIN).status_code == 409
        assert client.post(f"/sessions/{session_id}/agents",
                           json={"name": "NoRole"},
                           headers=ADMIN).status_code == 422
        assert client.post(f"/sessions/{session_id}/agents", json=body).status_code == 401

    def test_reasoning_is_admin_only(self, client):
        session_id = start_session(client)
        url = f"/sessions/{session_id}/agents/Ada/reasoning"
        assert client.get(url).status_code == 401
        assert wait_for(lambda: client.get(url, headers=ADMIN).json()["entries"])
        entry = client.get(url, headers=ADMIN).json()["entries"][0]
        assert entry["action"] == "NONE"
        missing = client.get(f"/sessions/{session_id}/agents/Ghost/reasoning",
                             headers=ADMIN)
        assert missing.status_code == 404


def sse_records(lines):
    """Group raw SSE lines into (id, event, data) records."""
    records = []
    current = {}
    for line in lines:
        if line == "":
            if current:
                records.append((current.get("id"), current.get("event"),
                                current.get("data")))
                current = {}
        elif line.startswith(":"):
            continue
        elif ": " in line:
            key, value = line.split(": ", 1)
            current[key] = value
    if current:
        records.append((current.get("id"), current.get("event"),
                        current.get("data")))
    return records


class TestStreaming:
    def test_stream_replays_then_follows_to_end(self, client):
        session_id = start_session(client, quiescence_s=0.4)
        client.post(f"/sessions/{session_id}/messages",
                    json={"author": "Ben", "text": "streamed hello"})
        lines = []
        with client.stream("GET", f"/sessions/{session_id}/stream") as resp:
            assert resp.status_code == 200
            assert resp.headers["content-type"].startswith("text/event-stream")
            for line in resp.iter_lines():
                lines.append(line)
                if line.startswith("event: end"):
                    break
        records = sse_records(lines)
        timeline_records = [r for r in records if r[1] == "timeline"]
        seqs = [int(r[0]) for r in timeline_records]
        assert seqs == sorted(seqs)
        assert len(seqs) == len(set(seqs)), "stream delivered a duplicate event"
        payloads = [json.loads(r[2]) for r in timeline_records]
        assert any(p["kind"] == "message"
                   and p["payload"]["text"] == "streamed hello" for p in payloads)
        assert records[-1][1] == "end"

    def test_stream_resume_skips_replayed_prefix(self, client, manager):
        session_id = start_session(client, quiescence_s=0.3)
        session = manager.get(session_id)
        assert session.wait(timeout=15)
        head = session.timeline.head()
        assert head >= 2

        lines = []
        with client.stream("GET", f"/sessions/{session_id}/stream",
                           params={"since": 2}) as resp:
            for line in resp.iter_lines():
                lines.append(line)
                if line.startswith("event: end"):
                    break
        records = sse_records(lines)
        seqs = [int(r[0]) for r in records if r[1] == "timeline"]
        assert seqs == list(range(3, head + 1))
