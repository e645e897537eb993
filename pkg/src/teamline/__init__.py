"""teamline: a shared-timeline engine for mixed human/AI teams, plus the
interaction-coding and reporting pipeline used to analyze the transcripts."""

from .timeline import (Event, Timeline, TimelineError, UnknownAuthor,
                       EmptyMessage, DuplicateFilename, CursorBeyondHead,
                       KIND_JOIN, KIND_MESSAGE, KIND_TYPING, KIND_FILE,
                       KIND_SYSTEM, load_jsonl, roles_map)
from .clock import RealClock, SimulatedClock, time_label
from .provider import (ChatMessage, ChatParams, ChatRequest, ChatResponse,
                       HttpProvider, ProviderError, ProviderUnavailable,
                       ScriptExhausted, MalformedResponse, ScriptedProvider,
                       scripted)
from .agent_runtime import (AgentRuntime, AgentSpec, Decision,
                            InstitutionalKnowledge, parse_decision)
from .session import (ConfigError, Deadlock, DuplicateName, HumanPlaybook,
                      RunArtifacts, Session, SessionConfig, SessionEnded,
                      TerminationRule, config_from_dict, export_artifacts,
                      golden_config, load_config, run_session)
from .transcript import (Turn, parse_markdown, render_markdown, to_csv,
                         from_csv, turns_from_events)
from .coding import (AgreementReport, CodedTurn, classify_transcript,
                     cohens_kappa, percent_agreement, read_codes_csv,
                     write_codes_csv)
from .report import ConditionReport, DiffReport, aggregate, diff_vs_control
from .checklist import (DEFAULT_RUBRIC, Rubric, ScoreCard, compare, score)

__version__ = "0.1.0"
