/**
 * Live event stream client.
 *
 * Speaks the gateway's SSE dialect over a streaming fetch rather than
 * EventSource so the resume point is explicit: every (re)connect passes
 * ?since=<last seen seq> and anything at or below that mark is dropped on
 * arrival. A dropped connection therefore never duplicates or loses blocks.
 */

import { TimelineEvent, isTimelineEvent } from "./types.js";

export interface SseFrame {
  id: string | null;
  event: string;
  data: string;
}

/** Incremental server-sent-events parser; feed it raw text chunks. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    let cut: number;
    while ((cut = this.buffer.indexOf("\n\n")) >= 0) {
      const raw = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseFrame(raw);
      if (frame !== null) frames.push(frame);
    }
    return frames;
  }
}

function parseFrame(raw: string): SseFrame | null {
  let id: string | null = null;
  let event = "message";
  const data: string[] = [];
  for (const line of raw.split("\n")) {
    if (line === "" || line.startsWith(":")) continue; // comment / keepalive
    const sep = line.indexOf(":");
    const field = sep < 0 ? line : line.slice(0, sep);
    let value = sep < 0 ? "" : line.slice(sep + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") id = value;
    else if (field === "event") event = value;
    else if (field === "data") data.push(value);
  }
  if (id === null && event === "message" && data.length === 0) return null;
  return { id, event, data: data.join("\n") };
}

export type StreamStatus = "connecting" | "live" | "retrying" | "ended" | "stopped";

export interface StreamOptions {
  baseUrl: string;
  sessionId: string;
  onEvent: (ev: TimelineEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
}

export class EventStream {
  lastSeq = 0;
  private stopped = false;
  private controller: AbortController | null = null;
  private readonly opts: StreamOptions;

  constructor(opts: StreamOptions) {
    this.opts = opts;
  }

  /** Connect and keep following the stream until stop() or session end. */
  async run(since = 0): Promise<void> {
    this.lastSeq = since;
    const retryDelay = this.opts.retryDelayMs ?? 1000;
    while (!this.stopped) {
      this.status("connecting");
      try {
        const ended = await this.followOnce();
        if (ended) {
          this.status("ended");
          return;
        }
      } catch {
        if (this.stopped) break;
      }
      if (this.stopped) break;
      this.status("retrying");
      await sleep(retryDelay);
    }
    this.status("stopped");
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private status(s: StreamStatus): void {
    this.opts.onStatus?.(s);
  }

  private url(): string {
    const { baseUrl, sessionId } = this.opts;
    return `${baseUrl}/sessions/${sessionId}/stream?since=${this.lastSeq}`;
  }

  /** One connection lifetime. Resolves true when the server signalled end. */
  private async followOnce(): Promise<boolean> {
    const doFetch = this.opts.fetchImpl ?? fetch;
    this.controller = new AbortController();
    const resp = await doFetch(this.url(), {
      signal: this.controller.signal,
      headers: { accept: "text/event-stream" },
    });
    if (!resp.ok || resp.body === null) {
      throw new Error(`stream request failed: ${resp.status}`);
    }
    this.status("live");
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) return false; // connection dropped without an end marker
        for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
          if (frame.event === "end") return true;
          if (frame.event !== "timeline") continue;
          const parsed: unknown = JSON.parse(frame.data);
          if (!isTimelineEvent(parsed)) continue;
          if (parsed.seq <= this.lastSeq) continue; // replayed history
          this.lastSeq = parsed.seq;
          this.opts.onEvent(parsed);
        }
      }
    } finally {
      reader.cancel().catch(() => undefined);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
