"""Run orchestration: wire a configured team to a timeline, drive the agents
and the scripted human playbook, detect termination, export artifacts.

Two execution modes share the same components:
  - simulated: a single-threaded event scheduler over a virtual clock, giving
    byte-identical artifacts for a fixed seed and scripted providers;
  - real: one thread per agent against the wall clock, used by the gateway.
"""

import heapq
import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import assets
from .agent_runtime import (AgentRuntime, AgentSpec, InstitutionalKnowledge,
                            DEFAULT_CODE_EXTENSIONS)
from .clock import DEFAULT_SIM_START, RealClock, SimulatedClock, parse_start
from .provider import (ChatParams, HttpProvider, ProviderError,
                       ProviderUnavailable, ScriptedProvider, ScriptEntry)
from .timeline import (KIND_FILE, KIND_JOIN, KIND_MESSAGE, KIND_SYSTEM,
                       KIND_TYPING, Timeline, join_payload, message_payload,
                       system_payload)
from .transcript import render_markdown

STATUS_RUNNING = "running"
STATUS_ENDED = "ended"

DEFAULT_NUDGE = "Hello, what is the progress so far?"


class SessionError(Exception):
    pass


class ConfigError(SessionError):
    pass


class Deadlock(SessionError):
    pass


class DuplicateName(SessionError):
    pass


class SessionEnded(SessionError):
    pass


class NotHuman(SessionError):
    pass


@dataclass
class HumanPlaybook:
    requirements_text: str
    clarification_answers: list = field(default_factory=list)
    greet_delay_s: float = 10.0
    reaction_delay_s: float = 2.0
    stall_nudge_text: str = DEFAULT_NUDGE
    stall_threshold_s: float = 120.0


@dataclass
class TerminationRule:
    require_code_file: bool = True
    none_streak: int = 2
    quiescence_s: float = 30.0


@dataclass
class SessionConfig:
    agents: list
    knowledge: InstitutionalKnowledge
    condition_name: str = "control"
    seed: int = 0
    pause_range_s: tuple = (3.0, 15.0)
    clock_mode: str = "simulated"
    clock_start: str = DEFAULT_SIM_START
    providers: dict = field(default_factory=dict)  # name -> provider def dict
    provider_binding: dict = field(default_factory=dict)  # agent -> provider name
    default_provider: str = "default"
    human_playbook: HumanPlaybook = None
    termination: TerminationRule = field(default_factory=TerminationRule)
    deadlock_cap_s: float = 2000.0  # virtual-clock cap
    deadlock_cap_real_s: float = 1800.0  # wall-clock cap
    code_extensions: tuple = DEFAULT_CODE_EXTENSIONS
    temperature: float = 0.2
    max_tokens: int = 1024
    file_max_tokens: int = 4096
    provider_failure_budget: int = 5
    disclose_humans: bool = False

    def human_specs(self):
        return [s for s in self.agents if s.is_scripted_human]

    def ai_specs(self):
        return [s for s in self.agents if not s.is_scripted_human]


def _spec_from_dict(d: dict) -> AgentSpec:
    return AgentSpec(
        name=d["name"],
        role_name=d["role_name"],
        persona=assets.resolve(d.get("persona", "")),
        is_scripted_human=bool(d.get("is_scripted_human", False)),
    )


def config_from_dict(data: dict) -> SessionConfig:
    try:
        agent_dicts = data["agents"]
        specs = [_spec_from_dict(d) for d in agent_dicts]
    except (KeyError, TypeError) as err:
        raise ConfigError(f"bad agents section: {err}")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("agent names must be unique")
    if not specs:
        raise ConfigError("at least one agent is required")
    for spec in specs:
        if not spec.is_scripted_human and not spec.persona:
            raise ConfigError(f"AI agent {spec.name!r} needs a persona")

    knowledge_data = data.get("knowledge", {})
    knowledge = InstitutionalKnowledge(
        base=assets.resolve(knowledge_data.get("base", "")),
        collaborative_move=knowledge_data.get("collaborative_move"),
    )

    playbook = None
    if data.get("human_playbook"):
        pb = data["human_playbook"]
        playbook = HumanPlaybook(
            requirements_text=assets.resolve(pb["requirements_text"]),
            clarification_answers=list(pb.get("clarification_answers", [])),
            greet_delay_s=float(pb.get("greet_delay_s", 10.0)),
            reaction_delay_s=float(pb.get("reaction_delay_s", 2.0)),
            stall_nudge_text=pb.get("stall_nudge_text", DEFAULT_NUDGE),
            stall_threshold_s=float(pb.get("stall_threshold_s", 120.0)),
        )
        if not playbook.requirements_text:
            raise ConfigError("human_playbook.requirements_text must be non-empty")
        if not any(s.is_scripted_human for s in specs):
            raise ConfigError("human_playbook configured but no human agent")

    term_data = data.get("termination", {})
    termination = TerminationRule(
        require_code_file=bool(term_data.get("require_code_file", True)),
        none_streak=int(term_data.get("none_streak", 2)),
        quiescence_s=float(term_data.get("quiescence_s", 30.0)),
    )
    if termination.none_streak < 1:
        raise ConfigError("termination.none_streak must be >= 1")

    pause = tuple(data.get("pause_range_s", (3.0, 15.0)))
    if len(pause) != 2 or pause[0] > pause[1] or pause[0] <= 0:
        raise ConfigError("pause_range_s must be [low, high] with 0 < low <= high")

    clock_mode = data.get("clock_mode", "simulated")
    if clock_mode not in ("simulated", "real"):
        raise ConfigError(f"unknown clock_mode: {clock_mode!r}")

    binding = {d["name"]: d["provider"] for d in agent_dicts if d.get("provider")}

    return SessionConfig(
        agents=specs,
        knowledge=knowledge,
        condition_name=data.get("condition_name", "control"),
        seed=int(data.get("seed", 0)),
        pause_range_s=pause,
        clock_mode=clock_mode,
        clock_start=data.get("clock_start", DEFAULT_SIM_START),
        providers=dict(data.get("providers", {})),
        provider_binding=binding,
        default_provider=data.get("default_provider", "default"),
        human_playbook=playbook,
        termination=termination,
        deadlock_cap_s=float(data.get("deadlock_cap_s", 2000.0)),
        deadlock_cap_real_s=float(data.get("deadlock_cap_real_s", 1800.0)),
        code_extensions=tuple(data.get("code_extensions", DEFAULT_CODE_EXTENSIONS)),
        temperature=float(data.get("temperature", 0.2)),
        max_tokens=int(data.get("max_tokens", 1024)),
        file_max_tokens=int(data.get("file_max_tokens", 4096)),
        provider_failure_budget=int(data.get("provider_failure_budget", 5)),
        disclose_humans=bool(data.get("disclose_humans", False)),
    )


def load_config(path_or_ref: str) -> SessionConfig:
    """Load a config document from a file path or an `asset:<name>` reference."""
    if path_or_ref.startswith(assets.ASSET_PREFIX):
        text = assets.resolve(path_or_ref)
    else:
        try:
            text = Path(path_or_ref).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read config {path_or_ref!r}: {err}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}")
    return config_from_dict(data)


def build_provider(definition: dict):
    kind = definition.get("type")
    if kind == "scripted":
        entries = [
            ScriptEntry(
                response=e["response"],
                when_contains=[e["when_contains"]] if isinstance(e.get("when_contains"), str)
                else list(e.get("when_contains", [])),
            )
            for e in definition.get("script", [])
        ]
        return ScriptedProvider(entries=entries,
                                fallback_response=definition.get("fallback_response"))
    if kind == "http":
        return HttpProvider(
            endpoint_url=definition["endpoint_url"],
            model_name=definition.get("model_name", ""),
            key_env=definition.get("key_env", "TEAMLINE_API_KEY"),
            retries=int(definition.get("retries", 3)),
            backoff_s=float(definition.get("backoff_s", 1.0)),
            timeout_s=float(definition.get("timeout_s", 60.0)),
        )
    raise ConfigError(f"unknown provider type: {kind!r}")


def build_providers(config: SessionConfig) -> dict:
    return {name: build_provider(d) for name, d in config.providers.items()}


class HumanDriver:
    """Executes the scripted human playbook against the timeline.

    Rules: greet the agents that have spoken once the greet delay passes; post
    the requirements when a question addressed to the human is pending; answer
    later questions from the configured list, in order; nudge on a stall. The
    human never speaks twice without an intervening event from someone else.
    """

    def __init__(self, spec: AgentSpec, playbook: HumanPlaybook, timeline,
                 elapsed_lookup, session_start_s: float = 0.0):
        self.spec = spec
        self.playbook = playbook
        self.timeline = timeline
        self.elapsed_lookup = elapsed_lookup
        self.session_start_s = session_start_s
        self.greeted = False
        self.requirements_posted = False
        self.answer_cursor = 0
        self.scanned_seq = 0
        self.last_spoken_seq = 0
        self.pending_trigger_times = []

    def _scan(self):
        for event in self.timeline.read_since(self.scanned_seq):
            self.scanned_seq = event.seq
            if (event.kind == KIND_MESSAGE and event.author != self.spec.name
                    and self.spec.name in event.payload["text"]
                    and "?" in event.payload["text"]):
                self.pending_trigger_times.append(self.elapsed_lookup(event))

    def _may_speak(self) -> bool:
        if self.last_spoken_seq == 0:
            return True
        return any(e.author != self.spec.name
                   for e in self.timeline.read_since(self.last_spoken_seq))

    def _post(self, text: str):
        event = self.timeline.append(self.spec.name, KIND_MESSAGE,
                                     message_payload(text))
        self.last_spoken_seq = event.seq
        return event

    def _greet_text(self) -> str:
        speakers = []
        for event in self.timeline.snapshot():
            if (event.kind == KIND_MESSAGE and event.author != self.spec.name
                    and event.author not in speakers):
                speakers.append(event.author)
        greeted = ", ".join(speakers) if speakers else "team"
        return (f"Hello {greeted}! This is {self.spec.name}, your "
                f"{self.spec.role_name}. Looking forward to working with you.")

    def next_wake(self, last_event_s: float):
        """Earliest time a playbook beat could fire, or None if nothing can.

        Only conditions that are currently able to act contribute a time;
        blocked conditions (no intervening event yet) reappear once the
        timeline moves, because this is recomputed on every scheduler pass.
        """
        self._scan()
        candidates = []
        if not self.greeted:
            candidates.append(self.session_start_s + self.playbook.greet_delay_s)
        may = self._may_speak()
        if may and self.pending_trigger_times:
            candidates.append(self.pending_trigger_times[0] + self.playbook.reaction_delay_s)
        if may:
            events = self.timeline.snapshot()
            if events and events[-1].author != self.spec.name:
                candidates.append(last_event_s + self.playbook.stall_threshold_s)
        return min(candidates) if candidates else None

    def wake(self, now_s: float, last_event_s: float):
        """Run one playbook beat if due. Returns the posted event or None."""
        self._scan()
        if not self.greeted and now_s >= self.session_start_s + self.playbook.greet_delay_s:
            self.greeted = True
            return self._post(self._greet_text())
        if self.pending_trigger_times and self._may_speak() and \
                now_s >= self.pending_trigger_times[0] + self.playbook.reaction_delay_s:
            self.pending_trigger_times.pop(0)
            if not self.requirements_posted:
                self.requirements_posted = True
                return self._post(self.playbook.requirements_text)
            if self.answer_cursor < len(self.playbook.clarification_answers):
                answer = self.playbook.clarification_answers[self.answer_cursor]
                self.answer_cursor += 1
                return self._post(answer)
            return None  # questions beyond the configured answers go unanswered
        if (now_s - last_event_s >= self.playbook.stall_threshold_s
                and self._may_speak()):
            events = self.timeline.snapshot()
            if events and events[-1].author != self.spec.name:
                return self._post(self.playbook.stall_nudge_text)
        return None


@dataclass
class RunArtifacts:
    events: list
    transcript_text: str
    meta: dict
    reasoning: dict  # agent name -> list of reasoning entry dicts
    out_dir: str = None


class Session:
    """A live team: timeline, agent runtimes, optional human driver."""

    def __init__(self, config: SessionConfig, providers: dict = None):
        self.config = config
        self.providers = providers if providers is not None else build_providers(config)
        if config.clock_mode == "simulated":
            self.clock = SimulatedClock(parse_start(config.clock_start))
        else:
            self.clock = RealClock()
        self.clock.start()
        self.timeline = Timeline(self.clock)
        self.runtimes = {}
        self.human_driver = None
        self.status = STATUS_RUNNING
        self.end_reason = None
        self.provider_failures = 0
        self._start_wall_ms = self.clock.now_ms()
        self._start_monotonic = time.monotonic()
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._threads = []

        for spec in config.agents:
            self._admit(spec, announce=True)
        if config.disclose_humans:
            humans = ", ".join(s.name for s in config.human_specs()) or "none"
            self.timeline.append("system", KIND_SYSTEM,
                                 system_payload(f"Human participants: {humans}."))

    # -- construction helpers -------------------------------------------------

    def _provider_for(self, spec: AgentSpec):
        name = self.config.provider_binding.get(spec.name, self.config.default_provider)
        if name not in self.providers:
            raise ConfigError(f"agent {spec.name!r} bound to unknown provider {name!r}")
        return self.providers[name]

    def _params_for(self, provider, max_tokens: int) -> ChatParams:
        model = getattr(provider, "model_name", "")
        return ChatParams(temperature=self.config.temperature,
                          max_tokens=max_tokens, model_name=model)

    def _admit(self, spec: AgentSpec, announce: bool, join_seq_known=None):
        event = self.timeline.append(spec.name, KIND_JOIN,
                                     join_payload(spec.name, spec.role_name)) if announce else None
        if spec.is_scripted_human:
            if self.config.human_playbook and self.human_driver is None:
                self.human_driver = HumanDriver(
                    spec, self.config.human_playbook, self.timeline,
                    elapsed_lookup=self._elapsed_of,
                    session_start_s=self.clock.elapsed_s())
            return event
        provider = self._provider_for(spec)
        runtime = AgentRuntime(
            spec=spec,
            knowledge=self.config.knowledge,
            timeline=self.timeline,
            provider=provider,
            clock=self.clock,
            rng=random.Random(f"{self.config.seed}:{spec.name}"),
            pause_range_s=self.config.pause_range_s,
            params=self._params_for(provider, self.config.max_tokens),
            file_params=self._params_for(provider, self.config.file_max_tokens),
            code_extensions=self.config.code_extensions,
            join_seq=join_seq_known if join_seq_known is not None else 0,
        )
        self.runtimes[spec.name] = runtime
        return event

    def _elapsed_of(self, event) -> float:
        return (event.wall_time - self._start_wall_ms) / 1000.0

    def _last_event_elapsed(self) -> float:
        events = self.timeline.snapshot()
        return self._elapsed_of(events[-1]) if events else 0.0

    # -- live administration --------------------------------------------------

    def add_agent(self, spec: AgentSpec, provider_name: str = None):
        """Admit a new participant mid-run. The Join lands on the timeline and
        the agent's first prompt carries the full history render."""
        with self._lock:
            if self.status != STATUS_RUNNING:
                raise SessionEnded("cannot add an agent after the session ended")
            if any(s.name == spec.name for s in self.config.agents):
                raise DuplicateName(spec.name)
            if provider_name:
                self.config.provider_binding[spec.name] = provider_name
            join_event = self.timeline.append(spec.name, KIND_JOIN,
                                              join_payload(spec.name, spec.role_name))
            self.config.agents.append(spec)
            if not spec.is_scripted_human:
                runtime = AgentRuntime(
                    spec=spec,
                    knowledge=self.config.knowledge,
                    timeline=self.timeline,
                    provider=self._provider_for(spec),
                    clock=self.clock,
                    rng=random.Random(f"{self.config.seed}:{spec.name}"),
                    pause_range_s=self.config.pause_range_s,
                    params=self._params_for(self._provider_for(spec), self.config.max_tokens),
                    file_params=self._params_for(self._provider_for(spec),
                                                 self.config.file_max_tokens),
                    code_extensions=self.config.code_extensions,
                    join_seq=join_event.seq,
                )
                self.runtimes[spec.name] = runtime
                if self.config.clock_mode == "real" and self._threads:
                    self._spawn_agent_thread(runtime)
            return join_event

    def post_human_message(self, author_name: str, text: str):
        with self._lock:
            spec = next((s for s in self.config.agents if s.name == author_name), None)
            if spec is None or not spec.is_scripted_human:
                raise NotHuman(f"{author_name!r} is not a human participant")
            if self.status != STATUS_RUNNING:
                raise SessionEnded("session has ended")
        return self.timeline.append(author_name, KIND_MESSAGE, message_payload(text))

    def post_human_typing(self, author_name: str):
        with self._lock:
            spec = next((s for s in self.config.agents if s.name == author_name), None)
            if spec is None or not spec.is_scripted_human:
                raise NotHuman(f"{author_name!r} is not a human participant")
            if self.status != STATUS_RUNNING:
                raise SessionEnded("session has ended")
        return self.timeline.append(author_name, KIND_TYPING, {})

    def participant_kinds(self) -> dict:
        return {s.name: ("human" if s.is_scripted_human else "ai")
                for s in self.config.agents}

    # -- termination ----------------------------------------------------------

    def _code_file_present(self) -> bool:
        return any(e.kind == KIND_FILE and e.payload.get("file_kind") == "code"
                   for e in self.timeline.snapshot())

    def _termination_holds(self, now_s: float) -> bool:
        rule = self.config.termination
        if rule.require_code_file and not self._code_file_present():
            return False
        for runtime in self.runtimes.values():
            if runtime.state.consecutive_none < rule.none_streak:
                return False
        if now_s - self._last_event_elapsed() < rule.quiescence_s:
            return False
        return True

    def _step_agent(self, runtime) -> bool:
        """Run one agent wake, absorbing provider failures into the budget."""
        try:
            event = runtime.step()
        except ProviderError:
            self.provider_failures += 1
            if self.provider_failures > self.config.provider_failure_budget:
                raise
            return False
        return event is not None

    # -- simulated-clock execution --------------------------------------------

    def _run_simulated(self):
        order = {spec.name: i for i, spec in enumerate(self.config.agents)}
        heap = []
        counter = 0
        for name, runtime in self.runtimes.items():
            heapq.heappush(heap, (runtime.draw_pause(), order[name], counter, name))
            counter += 1

        iterations = 0
        while True:
            iterations += 1
            if iterations > 1_000_000:
                raise Deadlock("scheduler iteration cap exceeded")

            wake, name = None, None
            if heap:
                wake, name = heap[0][0], heap[0][3]
            if self.human_driver is not None:
                human_wake = self.human_driver.next_wake(self._last_event_elapsed())
                if human_wake is not None and (wake is None or human_wake < wake):
                    wake, name = human_wake, None
            if wake is None:
                raise Deadlock("no participant can act")

            if wake > self.config.deadlock_cap_s:
                raise Deadlock(
                    f"no termination within {self.config.deadlock_cap_s} virtual seconds")

            self.clock.advance_to(wake)
            now = self.clock.elapsed_s()
            if self._termination_holds(now):
                return

            if name is None:
                self.human_driver.wake(now, self._last_event_elapsed())
            else:
                heapq.heappop(heap)
                runtime = self.runtimes[name]
                self._step_agent(runtime)
                heapq.heappush(heap,
                               (now + runtime.draw_pause(), order[name], counter, name))
                counter += 1

    # -- real-clock execution --------------------------------------------------

    def _spawn_agent_thread(self, runtime):
        def loop():
            while not self._stop.is_set():
                try:
                    self._step_agent(runtime)
                except ProviderError:
                    self._stop.set()
                    self.end_reason = "provider_failure"
                    return
                self._stop.wait(runtime.draw_pause())
        thread = threading.Thread(target=loop, daemon=True,
                                  name=f"agent-{runtime.spec.name}")
        self._threads.append(thread)
        thread.start()

    def _human_thread(self):
        def loop():
            while not self._stop.is_set():
                self.human_driver.wake(self.clock.elapsed_s(),
                                       self._last_event_elapsed())
                self._stop.wait(0.2)
        thread = threading.Thread(target=loop, daemon=True, name="human-playbook")
        self._threads.append(thread)
        thread.start()

    def start_background(self):
        """Real-clock mode for serving: spawn agent threads and a watchdog."""
        for runtime in list(self.runtimes.values()):
            self._spawn_agent_thread(runtime)
        if self.human_driver is not None:
            self._human_thread()

        def watchdog():
            while not self._stop.is_set():
                now = self.clock.elapsed_s()
                if self._termination_holds(now):
                    self.end_reason = self.end_reason or "terminated"
                    break
                if now > self.config.deadlock_cap_real_s:
                    self.end_reason = "deadlock"
                    break
                self._stop.wait(0.25)
            self._finish()
        thread = threading.Thread(target=watchdog, daemon=True, name="watchdog")
        self._threads.append(thread)
        thread.start()

    def _finish(self):
        self._stop.set()
        with self._lock:
            self.status = STATUS_ENDED

    def request_stop(self, reason: str = "stopped"):
        if self.status == STATUS_RUNNING:
            self.end_reason = self.end_reason or reason
        self._finish()

    def wait(self, timeout: float = None) -> bool:
        """Block until the background session ends. True when it did."""
        deadline = None if timeout is None else timeout
        for thread in list(self._threads):
            thread.join(deadline)
        return self.status == STATUS_ENDED

    # -- top-level run ---------------------------------------------------------

    def run(self) -> RunArtifacts:
        if self.config.clock_mode == "simulated":
            try:
                self._run_simulated()
                self.end_reason = "terminated"
            finally:
                self._finish()
        else:
            self.start_background()
            while self.status == STATUS_RUNNING:
                self._stop.wait(0.2)
            if self.end_reason == "deadlock":
                raise Deadlock(
                    f"no termination within {self.config.deadlock_cap_real_s} seconds")
        return self.artifacts()

    def artifacts(self) -> RunArtifacts:
        events = self.timeline.snapshot()
        usage = {"prompt_tokens": 0, "completion_tokens": 0}
        for runtime in self.runtimes.values():
            usage["prompt_tokens"] += runtime.token_usage[0]
            usage["completion_tokens"] += runtime.token_usage[1]
        meta = {
            "condition_name": self.config.condition_name,
            "seed": self.config.seed,
            "clock_mode": self.config.clock_mode,
            "end_reason": self.end_reason,
            "events": len(events),
            "virtual_elapsed_s": round(self.clock.elapsed_s(), 6),
            "real_elapsed_s": round(time.monotonic() - self._start_monotonic, 3),
            "decision_calls": {name: r.state.decision_calls
                               for name, r in sorted(self.runtimes.items())},
            "file_calls": {name: r.state.file_calls
                           for name, r in sorted(self.runtimes.items())},
            "token_usage": usage,
        }
        reasoning = {name: runtime.reasoning_dicts()
                     for name, runtime in self.runtimes.items()}
        return RunArtifacts(events=events, transcript_text=render_markdown(events),
                            meta=meta, reasoning=reasoning)


def export_artifacts(artifacts: RunArtifacts, out_dir) -> RunArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "timeline.jsonl", "w", encoding="utf-8") as fh:
        for event in artifacts.events:
            fh.write(event.to_json_line() + "\n")
    (out / "transcript.md").write_text(artifacts.transcript_text, encoding="utf-8")
    reasoning_dir = out / "reasoning"
    reasoning_dir.mkdir(exist_ok=True)
    for name, entries in artifacts.reasoning.items():
        with open(reasoning_dir / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for entry in entries:
                fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False,
                                    separators=(",", ":")) + "\n")
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(artifacts.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    artifacts.out_dir = str(out)
    return artifacts


def run_session(config: SessionConfig, providers: dict = None,
                out_dir=None) -> RunArtifacts:
    session = Session(config, providers=providers)
    artifacts = session.run()
    if out_dir is not None:
        export_artifacts(artifacts, out_dir)
    return artifacts


def golden_config() -> SessionConfig:
    """The bundled deterministic four-participant scenario."""
    return load_config(assets.ASSET_PREFIX + "config_golden")
