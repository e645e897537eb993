/**
 * Minimal in-process gateway stand-in for stream tests.
 *
 * Serves only GET /sessions/{id}/stream with the same SSE dialect as the
 * real gateway (id/event/data records, comment keepalives, a terminal end
 * frame). Each connection follows one step of a scripted plan so tests can
 * drop the socket mid-stream or replay history on purpose.
 */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { AddressInfo } from "node:net";
import { TimelineEvent } from "../src/types.js";

export interface StreamPlanStep {
  /** Destroy the socket after sending this many events (no end frame). */
  dropAfter?: number;
  /** Misbehave: replay from seq 1 no matter what ?since says. */
  ignoreSince?: boolean;
  /** Send every remaining event but keep the connection open, no end frame. */
  stayOpen?: boolean;
}

export class StubGateway {
  readonly requests: string[] = [];
  baseUrl = "";
  private connections = 0;
  private readonly server: Server;

  constructor(
    private readonly events: TimelineEvent[],
    private readonly plan: StreamPlanStep[] = [],
  ) {
    this.server = createServer((req, res) => void this.handle(req, res));
  }

  async start(): Promise<string> {
    await new Promise<void>((resolve) =>
      this.server.listen(0, "127.0.0.1", resolve),
    );
    const addr = this.server.address() as AddressInfo;
    this.baseUrl = `http://127.0.0.1:${addr.port}`;
    return this.baseUrl;
  }

  async close(): Promise<void> {
    this.server.closeAllConnections();
    await new Promise<void>((resolve) => this.server.close(() => resolve()));
  }

  private async handle(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const url = new URL(req.url ?? "/", "http://stub");
    this.requests.push((req.url ?? "").toString());
    if (req.method !== "GET" || !url.pathname.endsWith("/stream")) {
      res.writeHead(404, { "content-type": "application/json" });
      res.end('{"detail":"unknown route"}');
      return;
    }
    const since = Number(url.searchParams.get("since") ?? "0");
    const step = this.plan[this.connections] ?? {};
    this.connections++;

    res.writeHead(200, {
      "content-type": "text/event-stream",
      "cache-control": "no-cache",
    });
    await write(res, ": keepalive\n\n");
    const start = step.ignoreSince ? 0 : since;
    let sent = 0;
    for (const ev of this.events) {
      if (ev.seq <= start) continue;
      await write(res, `id: ${ev.seq}\nevent: timeline\ndata: ${JSON.stringify(ev)}\n\n`);
      sent++;
      if (step.dropAfter !== undefined && sent >= step.dropAfter) {
        res.destroy(); // simulate a dropped connection mid-stream
        return;
      }
    }
    if (step.stayOpen) return;
    await write(res, "event: end\ndata: {}\n\n");
    res.end();
  }
}

// flush each record before the next so a mid-stream destroy() cannot
// discard data the test expects the client to have seen
function write(res: ServerResponse, data: string): Promise<void> {
  return new Promise((resolve, reject) => {
    res.write(data, (err) => (err ? reject(err) : resolve()));
  });
}

let fakeSeq = 0;

export function fakeEvent(
  kind: TimelineEvent["kind"],
  author: string,
  payload: Record<string, unknown> = {},
  seq?: number,
): TimelineEvent {
  fakeSeq = seq ?? fakeSeq + 1;
  return {
    seq: fakeSeq,
    wall_time: 1_712_082_900_000 + fakeSeq * 1000,
    author,
    kind,
    payload,
  };
}

export function resetFakeSeq(): void {
  fakeSeq = 0;
}
