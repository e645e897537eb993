/**
 * Single-page controller: session picker, live channel, admin panel.
 *
 * All channel state is rebuilt from the gateway's event history plus the
 * live stream; the admin token is held in a variable only, never persisted.
 */

import { GatewayApi, ApiError } from "./api.js";
import { EventStream, StreamStatus } from "./connection.js";
import {
  FeedState,
  applyEvent,
  applyEvents,
  emptyFeed,
  renderBlockHtml,
  typingAuthors,
  escapeHtml,
} from "./feed.js";
import { RosterEntry, TimelineEvent } from "./types.js";

const TYPING_POST_GAP_MS = 4000;

interface AppState {
  api: GatewayApi;
  sessionId: string | null;
  identity: string;
  adminToken: string;
  feed: FeedState;
  roster: RosterEntry[];
  stream: EventStream | null;
  lastTypingPost: number;
}

const state: AppState = {
  api: new GatewayApi(""),
  sessionId: null,
  identity: "",
  adminToken: "",
  feed: emptyFeed(),
  roster: [],
  stream: null,
  lastTypingPost: 0,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(err: unknown): void {
  const banner = el<HTMLDivElement>("error-banner");
  const text =
    err instanceof ApiError ? `${err.status}: ${err.detail}` : String(err);
  banner.textContent = text;
  banner.style.display = "block";
  window.setTimeout(() => {
    banner.style.display = "none";
  }, 6000);
}

function setConnBadge(status: StreamStatus | "idle"): void {
  const badge = el<HTMLSpanElement>("conn-badge");
  badge.textContent = status;
  badge.className = `badge badge-${status === "live" ? "live" : "idle"}`;
}

// -- channel -------------------------------------------------------------------

function renderFeed(): void {
  const container = el<HTMLDivElement>("feed");
  container.innerHTML = state.feed.blocks.map(renderBlockHtml).join("");
  container.scrollTop = container.scrollHeight;
  renderTyping();
}

function renderTyping(): void {
  const names = typingAuthors(state.feed, Date.now());
  const line = el<HTMLDivElement>("typing-line");
  if (names.length === 0) {
    line.textContent = "";
  } else if (names.length === 1) {
    line.textContent = `${names[0]} is typing…`;
  } else {
    line.textContent = `${names.join(", ")} are typing…`;
  }
}

function renderRoster(): void {
  const list = el<HTMLUListElement>("roster");
  list.innerHTML = state.roster
    .map((entry) => {
      const kind = entry.kind ? ` <span class="kind">[${escapeHtml(entry.kind)}]</span>` : "";
      return `<li><strong>${escapeHtml(entry.name)}</strong> <span class="role">${escapeHtml(entry.role_name)}</span>${kind}</li>`;
    })
    .join("");
  const picker = el<HTMLSelectElement>("identity");
  const current = state.identity;
  picker.innerHTML = state.roster
    .map((entry) => `<option value="${escapeHtml(entry.name)}">${escapeHtml(entry.name)}</option>`)
    .join("");
  if (current && state.roster.some((r) => r.name === current)) {
    picker.value = current;
  }
  state.identity = picker.value;
}

function onStreamEvent(ev: TimelineEvent): void {
  if (applyEvent(state.feed, ev)) {
    if (ev.kind === "join") {
      void refreshRoster();
    }
    renderFeed();
  }
}

async function refreshRoster(): Promise<void> {
  if (state.sessionId === null) return;
  const page = await state.api.getRoster(
    state.sessionId,
    state.adminToken || undefined,
  );
  state.roster = page.agents;
  renderRoster();
}

async function openSession(sessionId: string): Promise<void> {
  state.stream?.stop();
  state.sessionId = sessionId;
  state.feed = emptyFeed();
  const history = await state.api.getEvents(sessionId, 0);
  applyEvents(state.feed, history.events);
  await refreshRoster();
  renderFeed();
  el<HTMLSpanElement>("session-label").textContent = sessionId;

  state.stream = new EventStream({
    baseUrl: currentBaseUrl(),
    sessionId,
    onEvent: onStreamEvent,
    onStatus: setConnBadge,
  });
  void state.stream.run(state.feed.lastSeq).catch(showError);
}

async function refreshSessions(): Promise<void> {
  const { sessions } = await state.api.listSessions();
  const list = el<HTMLUListElement>("session-list");
  list.innerHTML = sessions
    .map(
      (s) =>
        `<li><a href="#" data-id="${escapeHtml(s.id)}">${escapeHtml(s.id)}</a> ` +
        `${escapeHtml(s.condition_name)} <span class="muted">(${escapeHtml(s.status)})</span></li>`,
    )
    .join("");
  for (const link of Array.from(list.querySelectorAll("a[data-id]"))) {
    link.addEventListener("click", (evn) => {
      evn.preventDefault();
      const id = (link as HTMLAnchorElement).dataset.id;
      if (id) void openSession(id).catch(showError);
    });
  }
}

async function sendCurrentMessage(): Promise<void> {
  const input = el<HTMLTextAreaElement>("composer");
  const text = input.value.trim();
  if (!text || state.sessionId === null) return;
  try {
    const echo = await state.api.sendMessage(state.sessionId, state.identity, text);
    input.value = "";
    syncSendDisabled();
    // apply the server echo now; the stream copy dedupes on seq
    if (applyEvent(state.feed, echo)) renderFeed();
  } catch (err) {
    showError(err);
  }
}

function syncSendDisabled(): void {
  const input = el<HTMLTextAreaElement>("composer");
  el<HTMLButtonElement>("send-btn").disabled = input.value.trim() === "";
}

function maybePostTyping(): void {
  if (state.sessionId === null || state.identity === "") return;
  const now = Date.now();
  if (now - state.lastTypingPost < TYPING_POST_GAP_MS) return;
  state.lastTypingPost = now;
  state.api.sendTyping(state.sessionId, state.identity).catch(() => undefined);
}

// -- admin panel ---------------------------------------------------------------

async function addAgent(): Promise<void> {
  if (state.sessionId === null) return;
  const form = {
    name: el<HTMLInputElement>("agent-name").value.trim(),
    role_name: el<HTMLInputElement>("agent-role").value.trim(),
    persona: el<HTMLTextAreaElement>("agent-persona").value,
    provider: el<HTMLInputElement>("agent-provider").value.trim() || undefined,
  };
  try {
    await state.api.addAgent(state.sessionId, form, state.adminToken);
    el<HTMLInputElement>("agent-name").value = "";
  } catch (err) {
    showError(err);
  }
}

async function viewReasoning(): Promise<void> {
  if (state.sessionId === null) return;
  const agent = el<HTMLInputElement>("reasoning-agent").value.trim();
  const target = el<HTMLDivElement>("reasoning-view");
  try {
    const { entries } = await state.api.getReasoning(
      state.sessionId,
      agent,
      state.adminToken,
    );
    target.innerHTML = entries
      .map(
        (entry) =>
          `<div class="reasoning-entry"><span class="seq">@${entry.seq_at_decision}</span> ` +
          `<strong>${escapeHtml(entry.action)}</strong>` +
          `${entry.malformed ? ' <span class="malformed">malformed</span>' : ""}<br>` +
          `${escapeHtml(entry.reasoning)}</div>`,
      )
      .join("");
  } catch (err) {
    showError(err);
  }
}

async function stopSession(): Promise<void> {
  if (state.sessionId === null) return;
  try {
    await state.api.stopSession(state.sessionId, state.adminToken);
  } catch (err) {
    showError(err);
  }
}

// -- boot ----------------------------------------------------------------------

function currentBaseUrl(): string {
  const raw = el<HTMLInputElement>("base-url").value.trim();
  return (raw || window.location.origin).replace(/\/+$/, "");
}

function boot(): void {
  state.api = new GatewayApi(currentBaseUrl());
  setConnBadge("idle");
  syncSendDisabled();

  el<HTMLInputElement>("base-url").addEventListener("change", () => {
    state.api = new GatewayApi(currentBaseUrl());
    void refreshSessions().catch(showError);
  });
  el<HTMLButtonElement>("refresh-sessions").addEventListener("click", () =>
    refreshSessions().catch(showError),
  );
  el<HTMLSelectElement>("identity").addEventListener("change", (evn) => {
    state.identity = (evn.target as HTMLSelectElement).value;
  });
  el<HTMLInputElement>("admin-token").addEventListener("change", (evn) => {
    state.adminToken = (evn.target as HTMLInputElement).value;
    void refreshRoster().catch(() => undefined);
  });
  const composer = el<HTMLTextAreaElement>("composer");
  composer.addEventListener("input", () => {
    syncSendDisabled();
    maybePostTyping();
  });
  composer.addEventListener("keydown", (evn) => {
    if (evn.key === "Enter" && !evn.shiftKey) {
      evn.preventDefault();
      void sendCurrentMessage();
    }
  });
  el<HTMLButtonElement>("send-btn").addEventListener("click", () =>
    sendCurrentMessage(),
  );
  el<HTMLButtonElement>("add-agent-btn").addEventListener("click", () => addAgent());
  el<HTMLButtonElement>("reasoning-btn").addEventListener("click", () =>
    viewReasoning(),
  );
  el<HTMLButtonElement>("stop-session-btn").addEventListener("click", () =>
    stopSession(),
  );

  window.setInterval(renderTyping, 1000); // typing indicators expire on a timer
  void refreshSessions().catch(showError);
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
