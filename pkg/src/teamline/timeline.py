"""Append-only, totally ordered event log shared by every participant.

The timeline is the only communication substrate in the system: messages,
files, joins, typing notices and system notes all land here, each stamped
with a contiguous sequence number assigned under a single lock.
"""

import json
import queue
import threading
from dataclasses import dataclass, field

KIND_JOIN = "join"
KIND_MESSAGE = "message"
KIND_TYPING = "typing_started"
KIND_FILE = "file_created"
KIND_SYSTEM = "system"

ALL_KINDS = (KIND_JOIN, KIND_MESSAGE, KIND_TYPING, KIND_FILE, KIND_SYSTEM)


class TimelineError(Exception):
    pass


class UnknownAuthor(TimelineError):
    pass


class EmptyMessage(TimelineError):
    pass


class DuplicateFilename(TimelineError):
    pass


class CursorBeyondHead(TimelineError):
    pass


@dataclass(frozen=True)
class Event:
    seq: int
    wall_time: int  # epoch milliseconds from the session clock
    author: str
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "wall_time": self.wall_time,
            "author": self.author,
            "kind": self.kind,
            "payload": dict(self.payload),
        }

    def to_json_line(self) -> str:
        # sort_keys + fixed separators so exported artifacts are byte-stable
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))


def event_from_dict(d: dict) -> Event:
    return Event(seq=int(d["seq"]), wall_time=int(d["wall_time"]),
                 author=d["author"], kind=d["kind"], payload=dict(d["payload"]))


def join_payload(name: str, role_name: str) -> dict:
    return {"name": name, "role_name": role_name}


def message_payload(text: str) -> dict:
    return {"text": text}


def file_payload(filename: str, file_kind: str, content: str) -> dict:
    return {"filename": filename, "file_kind": file_kind, "content": content}


def system_payload(note: str) -> dict:
    return {"note": note}


def roles_map(events) -> dict:
    """Author name to role name, as announced by Join events."""
    roles = {}
    for event in events:
        if event.kind == KIND_JOIN:
            roles[event.payload["name"]] = event.payload["role_name"]
    return roles


class Subscription:
    """Order-preserving feed of events appended after the subscription was taken."""

    def __init__(self, timeline):
        self._timeline = timeline
        self._queue = queue.Queue()

    def get(self, timeout: float = None):
        """Next event, or None on timeout."""
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self):
        self._timeline.unsubscribe(self)


class Timeline:
    """Thread-safe total order of immutable events, seqs contiguous from 1."""

    def __init__(self, clock, auto_suffix_files: bool = True):
        self.clock = clock
        self.auto_suffix_files = auto_suffix_files
        self._events = []
        self._authors = set()
        self._filenames = set()
        self._subscribers = []
        self._lock = threading.Lock()

    def head(self) -> int:
        with self._lock:
            return len(self._events)

    def append(self, author: str, kind: str, payload: dict) -> Event:
        if kind not in ALL_KINDS:
            raise TimelineError(f"unknown event kind: {kind!r}")
        with self._lock:
            payload = dict(payload)
            if kind == KIND_MESSAGE and not payload.get("text"):
                raise EmptyMessage(f"empty message from {author!r}")
            if kind not in (KIND_JOIN, KIND_SYSTEM) and author not in self._authors:
                raise UnknownAuthor(f"{author!r} has not joined this timeline")
            if kind == KIND_FILE:
                payload["filename"] = self._claim_filename(payload.get("filename", ""))
            event = Event(
                seq=len(self._events) + 1,
                wall_time=self.clock.now_ms(),
                author=author,
                kind=kind,
                payload=payload,
            )
            self._events.append(event)
            if kind == KIND_JOIN:
                self._authors.add(payload["name"])
            subscribers = list(self._subscribers)
            # notify inside the lock so per-subscriber delivery order matches seq order
            for sub in subscribers:
                sub._queue.put(event)
        return event

    def _claim_filename(self, filename: str) -> str:
        if not filename:
            raise TimelineError("file event requires a filename")
        if filename in self._filenames:
            if not self.auto_suffix_files:
                raise DuplicateFilename(filename)
            version = 2
            while f"{filename}.v{version}" in self._filenames:
                version += 1
            filename = f"{filename}.v{version}"
        self._filenames.add(filename)
        return filename

    def read_since(self, cursor: int) -> list:
        with self._lock:
            if cursor < 0 or cursor > len(self._events):
                raise CursorBeyondHead(f"cursor {cursor} beyond head {len(self._events)}")
            return self._events[cursor:]

    def snapshot(self) -> list:
        with self._lock:
            return list(self._events)

    def is_registered(self, author: str) -> bool:
        with self._lock:
            return author in self._authors

    def subscribe(self) -> Subscription:
        sub = Subscription(self)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription):
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def dump_jsonl(self, path):
        events = self.snapshot()
        with open(path, "w", encoding="utf-8") as fh:
            for event in events:
                fh.write(event.to_json_line() + "\n")


def load_jsonl(path) -> list:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(event_from_dict(json.loads(line)))
    return events
