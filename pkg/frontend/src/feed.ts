/**
 * Event feed reducer and deterministic renderers.
 *
 * The feed is rebuilt purely from timeline events: apply them in seq order
 * and every view (blocks, roster, typing indicators) falls out. Events with
 * seq <= lastSeq are dropped, so replays after a reconnect are harmless.
 */

import {
  TimelineEvent,
  RosterEntry,
  joinPayload,
  messagePayload,
  filePayload,
  systemPayload,
} from "./types.js";

export const TYPING_EXPIRY_MS = 60_000;

export interface FeedBlock {
  seq: number;
  wallTime: number;
  author: string;
  role: string;
  kind: "join" | "message" | "file" | "system";
  text: string;
  filename?: string;
  fileKind?: string;
}

export interface FeedState {
  blocks: FeedBlock[];
  roster: RosterEntry[];
  roles: Map<string, string>;
  typing: Map<string, number>; // author -> wall_time of the typing event
  lastSeq: number;
}

export function emptyFeed(): FeedState {
  return {
    blocks: [],
    roster: [],
    roles: new Map(),
    typing: new Map(),
    lastSeq: 0,
  };
}

/** Apply one event in place. Returns false when the event was a duplicate. */
export function applyEvent(state: FeedState, ev: TimelineEvent): boolean {
  if (ev.seq <= state.lastSeq) return false;
  state.lastSeq = ev.seq;
  switch (ev.kind) {
    case "join": {
      const p = joinPayload(ev);
      if (!state.roles.has(p.name)) {
        state.roles.set(p.name, p.role_name);
        state.roster.push({ name: p.name, role_name: p.role_name });
      }
      state.blocks.push(block(ev, "join", p.role_name, p.role_name));
      break;
    }
    case "typing_started":
      state.typing.set(ev.author, ev.wall_time);
      break;
    case "message":
      state.typing.delete(ev.author);
      state.blocks.push(
        block(ev, "message", roleOf(state, ev.author), messagePayload(ev).text),
      );
      break;
    case "file_created": {
      state.typing.delete(ev.author);
      const p = filePayload(ev);
      const b = block(ev, "file", roleOf(state, ev.author), p.content);
      b.filename = p.filename;
      b.fileKind = p.file_kind;
      state.blocks.push(b);
      break;
    }
    case "system":
      state.blocks.push(block(ev, "system", "", systemPayload(ev).note));
      break;
  }
  return true;
}

export function applyEvents(state: FeedState, events: TimelineEvent[]): number {
  let applied = 0;
  for (const ev of events) {
    if (applyEvent(state, ev)) applied++;
  }
  return applied;
}

function block(
  ev: TimelineEvent,
  kind: FeedBlock["kind"],
  role: string,
  text: string,
): FeedBlock {
  return { seq: ev.seq, wallTime: ev.wall_time, author: ev.author, kind, role, text };
}

function roleOf(state: FeedState, author: string): string {
  return state.roles.get(author) ?? "";
}

/** Authors currently shown as typing, oldest indicator first. */
export function typingAuthors(
  state: FeedState,
  nowMs: number,
  expiryMs: number = TYPING_EXPIRY_MS,
): string[] {
  const live: Array<[string, number]> = [];
  for (const [author, started] of state.typing) {
    if (nowMs - started < expiryMs) live.push([author, started]);
  }
  live.sort((a, b) => a[1] - b[1] || (a[0] < b[0] ? -1 : 1));
  return live.map(([author]) => author);
}

// channel view shows minutes only; seconds stay in the admin reasoning view
export function formatClock(wallTimeMs: number): string {
  const d = new Date(wallTimeMs);
  const h24 = d.getUTCHours();
  const h12 = h24 % 12 === 0 ? 12 : h24 % 12;
  const minutes = String(d.getUTCMinutes()).padStart(2, "0");
  return `${h12}:${minutes} ${h24 < 12 ? "AM" : "PM"}`;
}

// -- plain-text rendering (golden snapshot target) ----------------------------

const CONT_INDENT = "    ";

function continued(text: string): string {
  return text.split("\n").join(`\n${CONT_INDENT}`);
}

export function renderBlockText(b: FeedBlock): string {
  const stamp = `[${formatClock(b.wallTime)}]`;
  switch (b.kind) {
    case "join":
      return `${stamp} * ${b.author} joined as ${b.role}`;
    case "system":
      return `${stamp} -- ${b.text}`;
    case "file":
      return (
        `${stamp} ${b.author} (${b.role}) shared file ${b.filename} ` +
        `(${b.fileKind})\n${CONT_INDENT}${continued(b.text)}`
      );
    default:
      return `${stamp} ${b.author} (${b.role}): ${continued(b.text)}`;
  }
}

export function renderFeedText(state: FeedState): string {
  if (state.blocks.length === 0) return "";
  return state.blocks.map(renderBlockText).join("\n") + "\n";
}

// -- html rendering ------------------------------------------------------------

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** One feed block as an HTML string. Code files get monospace display. */
export function renderBlockHtml(b: FeedBlock): string {
  const stamp = `<span class="stamp">${formatClock(b.wallTime)}</span>`;
  if (b.kind === "join") {
    return `<div class="block join">${stamp} <em>${escapeHtml(b.author)} joined as ${escapeHtml(b.role)}</em></div>`;
  }
  if (b.kind === "system") {
    return `<div class="block system">${stamp} <em>${escapeHtml(b.text)}</em></div>`;
  }
  const who = `<strong>${escapeHtml(b.author)}</strong> <span class="role">(${escapeHtml(b.role)})</span>`;
  if (b.kind === "file") {
    const body =
      b.fileKind === "code"
        ? `<pre><code>${escapeHtml(b.text)}</code></pre>`
        : `<pre class="doc">${escapeHtml(b.text)}</pre>`;
    const name = escapeHtml(b.filename ?? "");
    const href =
      `data:text/plain;charset=utf-8,` + encodeURIComponent(b.text);
    return (
      `<div class="block file">${stamp} ${who} shared ` +
      `<details><summary>&lt;File: ${name}&gt; ` +
      `<a download="${name}" href="${href}">download</a></summary>${body}</details></div>`
    );
  }
  return `<div class="block message">${stamp} ${who}: <span class="text">${escapeHtml(b.text).split("\n").join("<br>")}</span></div>`;
}
