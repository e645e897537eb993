"""Autonomous agent loop: observe new timeline events, decide, act or stay quiet.

Each agent is driven by wake-ups. On a wake it compares its cursor against the
timeline head; only when something new happened does it assemble a prompt and
spend a provider call. The reply is parsed from a tagged plain-text protocol
(ACTION / REASONING / CONTENT) so any chat-completion backend can drive it.
"""

import re
from dataclasses import dataclass, field

from . import assets
from .provider import ChatMessage, ChatParams, ChatRequest
from .timeline import (KIND_FILE, KIND_JOIN, KIND_MESSAGE, KIND_SYSTEM,
                       KIND_TYPING, file_payload, message_payload, roles_map)

ACTION_MESSAGE = "MESSAGE"
ACTION_FILE = "FILE"
ACTION_NONE = "NONE"

NO_TYPING_LINE = "No one is typing."
TYPING_EXPIRY_S = 60.0

DEFAULT_CODE_EXTENSIONS = (".java", ".py", ".js")

_ACTION_RE = re.compile(r"^ACTION:\s*(MESSAGE|FILE|NONE)\s*$", re.IGNORECASE)
_FILENAME_RE = re.compile(r"^FILENAME:\s*(.+?)\s*$")


@dataclass
class AgentSpec:
    name: str
    role_name: str
    persona: str = ""
    is_scripted_human: bool = False

    def label(self) -> str:
        return f"{self.name} ({self.role_name})"


@dataclass
class InstitutionalKnowledge:
    base: str
    collaborative_move: str = None

    def render(self) -> str:
        if not self.collaborative_move:
            return self.base
        template = assets.load_asset("knowledge_move_template")
        sentence = template.strip().replace("{description}", self.collaborative_move)
        return f"{self.base}\n\n{sentence}"


@dataclass
class Decision:
    action: str
    reasoning: str = ""
    content: str = ""
    malformed: bool = False


@dataclass
class ReasoningEntry:
    seq_at_decision: int
    decision: Decision

    def to_dict(self) -> dict:
        return {
            "seq_at_decision": self.seq_at_decision,
            "action": self.decision.action,
            "reasoning": self.decision.reasoning,
            "content": self.decision.content,
            "malformed": self.decision.malformed,
        }


@dataclass
class AgentState:
    cursor: int = 0
    reasoning_log: list = field(default_factory=list)
    consecutive_none: int = 0
    decision_calls: int = 0
    file_calls: int = 0


def parse_decision(text: str) -> Decision:
    """Total parser for the tagged reply format.

    Anything that does not open with a valid ACTION line comes back as a NONE
    decision carrying the raw text as reasoning, flagged malformed, so a noisy
    model can never crash the loop.
    """
    lines = (text or "").splitlines()
    first = 0
    while first < len(lines) and not lines[first].strip():
        first += 1
    if first >= len(lines):
        return Decision(ACTION_NONE, reasoning=text or "", malformed=True)
    m = _ACTION_RE.match(lines[first].strip())
    if not m:
        return Decision(ACTION_NONE, reasoning=text, malformed=True)
    action = m.group(1).upper()

    reasoning_parts, content_parts = [], []
    bucket = None
    for line in lines[first + 1:]:
        stripped = line.strip()
        if bucket is not content_parts and stripped.upper().startswith("CONTENT:"):
            bucket = content_parts
            remainder = line[line.upper().index("CONTENT:") + len("CONTENT:"):]
            if remainder.strip():
                bucket.append(remainder.lstrip())
            continue
        if bucket is None and stripped.upper().startswith("REASONING:"):
            bucket = reasoning_parts
            remainder = line[line.upper().index("REASONING:") + len("REASONING:"):]
            if remainder.strip():
                bucket.append(remainder.lstrip())
            continue
        if bucket is not None:
            bucket.append(line)
    reasoning = "\n".join(reasoning_parts).strip()
    content = "\n".join(content_parts).strip()

    if action == ACTION_NONE:
        return Decision(ACTION_NONE, reasoning=reasoning)
    if not content:
        # MESSAGE and FILE need a body; fall back rather than emit an empty event
        return Decision(ACTION_NONE, reasoning=text, malformed=True)
    return Decision(action, reasoning=reasoning, content=content)


def typing_authors(events, now_ms: int, exclude: str = None) -> set:
    """Authors whose typing notice is still live: no later message/file of
    theirs, and the notice is younger than the expiry window."""
    latest_typing = {}
    for event in events:
        if event.kind == KIND_TYPING:
            latest_typing[event.author] = event.wall_time
        elif event.kind in (KIND_MESSAGE, KIND_FILE):
            latest_typing.pop(event.author, None)
    active = set()
    for author, started_ms in latest_typing.items():
        if author == exclude:
            continue
        if now_ms - started_ms <= TYPING_EXPIRY_S * 1000:
            active.add(author)
    return active


def render_event(event, roles: dict) -> ChatMessage:
    role = roles.get(event.author, "Unknown")
    label = f"{event.author} ({role})"
    if event.kind == KIND_MESSAGE:
        return ChatMessage(label, event.payload["text"])
    if event.kind == KIND_FILE:
        return ChatMessage(f"{label} shared file <{event.payload['filename']}>",
                           event.payload["content"])
    if event.kind == KIND_JOIN:
        return ChatMessage("System",
                           f"{event.payload['name']} has joined the team as "
                           f"{event.payload['role_name']}.")
    if event.kind == KIND_SYSTEM:
        return ChatMessage("System", event.payload["note"])
    return None


def assemble_prompt(spec: AgentSpec, knowledge: InstitutionalKnowledge, events,
                    typing: set, params: ChatParams = None, roles: dict = None) -> ChatRequest:
    """System prompt = persona + institutional knowledge + reply protocol;
    message list = rendered events plus a final who-is-typing status line.

    roles: author name to role name map; defaults to what the given events
    announce, but callers with a wider view (late joiners whose prompt window
    starts mid-session) should pass the full map.
    """
    protocol = assets.load_asset("decision_protocol")
    system_prompt = "\n\n".join(
        part.strip() for part in (spec.persona, knowledge.render(), protocol) if part.strip())

    if roles is None:
        roles = roles_map(events)
    messages = []
    for event in events:
        rendered = render_event(event, roles)
        if rendered is not None:
            messages.append(rendered)
    if typing:
        status = "Currently typing: " + ", ".join(sorted(typing)) + "."
    else:
        status = NO_TYPING_LINE
    messages.append(ChatMessage("Status", status))
    return ChatRequest(system_prompt=system_prompt, messages=messages,
                      params=params or ChatParams())


def extract_filename(instructions: str):
    for line in instructions.splitlines():
        m = _FILENAME_RE.match(line.strip())
        if m:
            return m.group(1)
    return None


def infer_file_kind(filename: str, code_extensions=DEFAULT_CODE_EXTENSIONS) -> str:
    lowered = filename.lower()
    for ext in code_extensions:
        if lowered.endswith(ext):
            return "code"
    return "document"


class AgentRuntime:
    """One AI participant bound to a timeline, a provider, and a seeded RNG."""

    def __init__(self, spec: AgentSpec, knowledge: InstitutionalKnowledge,
                 timeline, provider, clock, rng,
                 pause_range_s=(3.0, 15.0), params: ChatParams = None,
                 file_params: ChatParams = None,
                 code_extensions=DEFAULT_CODE_EXTENSIONS,
                 join_seq: int = 0):
        self.spec = spec
        self.knowledge = knowledge
        self.timeline = timeline
        self.provider = provider
        self.clock = clock
        self.rng = rng
        self.pause_range_s = pause_range_s
        self.params = params or ChatParams()
        self.file_params = file_params or ChatParams(max_tokens=4096)
        self.code_extensions = tuple(code_extensions)
        self.state = AgentState(cursor=join_seq)
        # join_seq  > 0 marks a late joiner: events before it are normally out
        # of the prompt window, except for the one-time catch-up render below
        self.join_seq = join_seq
        self._caught_up = join_seq == 0
        self.token_usage = [0, 0]

    def draw_pause(self) -> float:
        low, high = self.pause_range_s
        return self.rng.uniform(low, high)

    def step(self):
        """One wake-up. Returns the appended event, or None.

        Quiescent wakes (nothing new on the timeline) cost no provider call and
        count as an implicit "no further action" for termination purposes.
        """
        events = self.timeline.snapshot()
        head = events[-1].seq if events else 0
        if self.state.cursor >= head:
            self.state.consecutive_none += 1
            return None

        seen_head = head
        self.state.cursor = head
        if self._caught_up:
            window = [e for e in events if e.seq > self.join_seq]
        else:
            window = events  # first prompt after a late join sees full history
            self._caught_up = True
        typing = typing_authors(events, self.clock.now_ms(), exclude=self.spec.name)
        request = assemble_prompt(self.spec, self.knowledge, window, typing,
                                  self.params, roles=roles_map(events))
        response = self.provider.complete(request)
        self._track_usage(response)
        self.state.decision_calls += 1
        decision = parse_decision(response.text)
        self.state.reasoning_log.append(ReasoningEntry(seen_head, decision))

        if decision.action == ACTION_MESSAGE:
            self.state.consecutive_none = 0
            self.timeline.append(self.spec.name, KIND_TYPING, {})
            event = self.timeline.append(self.spec.name, KIND_MESSAGE,
                                         message_payload(decision.content))
            self._skip_own_events()
            return event
        if decision.action == ACTION_FILE:
            self.state.consecutive_none = 0
            event = self.generate_file(decision.content)
            self._skip_own_events()
            return event
        self.state.consecutive_none += 1
        return None

    def generate_file(self, instructions: str):
        """Second-stage call: the agent's own instructions become the brief for
        a dedicated file-writing completion."""
        if not instructions.strip():
            raise ValueError("file generation requires non-empty instructions")
        request = ChatRequest(
            system_prompt=assets.load_asset("file_generation"),
            messages=[ChatMessage(self.spec.label(), instructions)],
            params=self.file_params,
        )
        response = self.provider.complete(request)
        self._track_usage(response)
        self.state.file_calls += 1
        filename = extract_filename(instructions)
        if not filename:
            slug = self.spec.role_name.lower().replace(" ", "-")
            filename = f"{slug}-{self.timeline.head() + 1}.txt"
        kind = infer_file_kind(filename, self.code_extensions)
        return self.timeline.append(self.spec.name, KIND_FILE,
                                    file_payload(filename, kind, response.text))

    def _skip_own_events(self):
        # own appends never re-trigger a prompt; advance over the trailing run
        for event in self.timeline.read_since(self.state.cursor):
            if event.author != self.spec.name:
                break
            self.state.cursor = event.seq

    def _track_usage(self, response):
        self.token_usage[0] += response.usage.prompt_tokens
        self.token_usage[1] += response.usage.completion_tokens

    def reasoning_dicts(self) -> list:
        return [entry.to_dict() for entry in self.state.reasoning_log]
