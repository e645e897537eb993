"""HTTP serving layer: live event streaming, human message posting, agent
administration and reasoning inspection over a running session.

Admin endpoints require a bearer token taken from the TEAMLINE_ADMIN_TOKEN
environment variable; with the variable unset every admin request is refused.
Non-admin responses never reveal which participants are human.
"""

import json
import os
import threading

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from .session import (ConfigError, DuplicateName, NotHuman, Session,
                      SessionEnded, STATUS_ENDED, config_from_dict)
from .agent_runtime import AgentSpec
from .timeline import (EmptyMessage, KIND_FILE, KIND_MESSAGE, TimelineError,
                       UnknownAuthor)
from .transcript import turns_from_events
from . import assets

ADMIN_TOKEN_ENV = "TEAMLINE_ADMIN_TOKEN"


class SessionManager:
    """Owns the live sessions served by one gateway process."""

    def __init__(self):
        self._sessions = {}
        self._counter = 0
        self._lock = threading.Lock()

    def create(self, config_data: dict, providers=None, start: bool = True) -> str:
        config = config_from_dict(config_data)
        config.clock_mode = "real"  # served sessions run on the wall clock
        session = Session(config, providers=providers)
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter}"
            self._sessions[session_id] = session
        if start:
            session.start_background()
        return session_id

    def adopt(self, session: Session) -> str:
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter}"
            self._sessions[session_id] = session
        return session_id

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def ids(self):
        with self._lock:
            return list(self._sessions)

    def stop_all(self):
        for session_id in self.ids():
            self._sessions[session_id].request_stop("gateway shutdown")


def _admin_token() -> str:
    return os.environ.get(ADMIN_TOKEN_ENV, "")


def _is_admin(request: Request) -> bool:
    token = _admin_token()
    if not token:
        return False
    return request.headers.get("authorization", "") == f"Bearer {token}"


def require_admin(request: Request):
    if not _admin_token():
        raise HTTPException(status_code=401, detail="admin token not configured")
    if not _is_admin(request):
        raise HTTPException(status_code=401, detail="invalid admin token")


def _event_sse(event) -> str:
    return f"id: {event.seq}\nevent: timeline\ndata: {event.to_json_line()}\n\n"


def create_app(manager: SessionManager = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="teamline gateway")
    app.state.manager = manager
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.post("/sessions", status_code=201)
    def create_session(body: dict, _=Depends(require_admin)):
        config_data = body.get("config")
        if config_data is None and body.get("config_asset"):
            try:
                config_data = json.loads(assets.load_asset(body["config_asset"]))
            except (assets.UnknownAsset, json.JSONDecodeError) as err:
                raise HTTPException(status_code=422, detail=str(err))
        if not isinstance(config_data, dict):
            raise HTTPException(status_code=422, detail="config object required")
        try:
            session_id = manager.create(config_data)
        except ConfigError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return {"id": session_id}

    @app.get("/sessions")
    def list_sessions():
        out = []
        for session_id in manager.ids():
            session = manager.get(session_id)
            out.append({"id": session_id, "status": session.status,
                        "condition_name": session.config.condition_name})
        return {"sessions": out}

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = 0):
        session = manager.get(session_id)
        try:
            events = session.timeline.read_since(since)
        except TimelineError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return {"head": session.timeline.head(), "status": session.status,
                "events": [e.to_dict() for e in events]}

    @app.get("/sessions/{session_id}/stream")
    def stream_events(session_id: str, since: int = 0):
        session = manager.get(session_id)

        def generate():
            sub = session.timeline.subscribe()
            try:
                last = since
                for event in session.timeline.read_since(since):
                    last = event.seq
                    yield _event_sse(event)
                while True:
                    event = sub.get(timeout=0.5)
                    if event is None:
                        if session.status == STATUS_ENDED:
                            yield "event: end\ndata: {}\n\n"
                            return
                        yield ": keepalive\n\n"
                        continue
                    if event.seq <= last:
                        continue  # already replayed from history
                    last = event.seq
                    yield _event_sse(event)
            finally:
                session.timeline.unsubscribe(sub)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/messages", status_code=201)
    def post_message(session_id: str, body: dict):
        session = manager.get(session_id)
        author = body.get("author", "")
        text = body.get("text", "")
        try:
            event = session.post_human_message(author, text)
        except NotHuman as err:
            raise HTTPException(status_code=403, detail=str(err))
        except SessionEnded as err:
            raise HTTPException(status_code=409, detail=str(err))
        except (EmptyMessage, UnknownAuthor) as err:
            raise HTTPException(status_code=422, detail=str(err))
        return event.to_dict()

    @app.post("/sessions/{session_id}/typing", status_code=201)
    def post_typing(session_id: str, body: dict):
        session = manager.get(session_id)
        try:
            event = session.post_human_typing(body.get("author", ""))
        except NotHuman as err:
            raise HTTPException(status_code=403, detail=str(err))
        except SessionEnded as err:
            raise HTTPException(status_code=409, detail=str(err))
        except UnknownAuthor as err:
            raise HTTPException(status_code=422, detail=str(err))
        return event.to_dict()

    @app.get("/sessions/{session_id}/agents")
    def get_agents(session_id: str, request: Request):
        session = manager.get(session_id)
        admin = _is_admin(request)
        kinds = session.participant_kinds()
        roster = []
        for spec in session.config.agents:
            entry = {"name": spec.name, "role_name": spec.role_name}
            if admin:
                entry["kind"] = kinds[spec.name]
            roster.append(entry)
        return {"agents": roster}

    @app.post("/sessions/{session_id}/agents", status_code=201)
    def post_agent(session_id: str, body: dict, _=Depends(require_admin)):
        session = manager.get(session_id)
        try:
            spec = AgentSpec(name=body["name"], role_name=body["role_name"],
                             persona=assets.resolve(body.get("persona", "")),
                             is_scripted_human=bool(body.get("is_scripted_human", False)))
        except KeyError as err:
            raise HTTPException(status_code=422, detail=f"missing field {err}")
        try:
            event = session.add_agent(spec, provider_name=body.get("provider"))
        except DuplicateName as err:
            raise HTTPException(status_code=409, detail=str(err))
        except SessionEnded as err:
            raise HTTPException(status_code=409, detail=str(err))
        except ConfigError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return event.to_dict()

    @app.get("/sessions/{session_id}/agents/{agent_name}/reasoning")
    def get_reasoning(session_id: str, agent_name: str, _=Depends(require_admin)):
        session = manager.get(session_id)
        runtime = session.runtimes.get(agent_name)
        if runtime is None:
            raise HTTPException(status_code=404, detail="unknown agent")
        return {"agent": agent_name, "entries": runtime.reasoning_dicts()}

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        session = manager.get(session_id)
        events = session.timeline.snapshot()
        turns = turns_from_events(events)
        by_author = {}
        files = []
        for event in events:
            if event.kind == KIND_MESSAGE:
                by_author[event.author] = by_author.get(event.author, 0) + 1
            elif event.kind == KIND_FILE:
                files.append(event.payload["filename"])
        return {
            "status": session.status,
            "end_reason": session.end_reason,
            "events": len(events),
            "turns": len(turns),
            "messages_by_author": by_author,
            "files": files,
        }

    @app.post("/sessions/{session_id}/stop")
    def stop_session(session_id: str, _=Depends(require_admin)):
        session = manager.get(session_id)
        session.request_stop("stopped by admin")
        return {"status": session.status}

    return app
