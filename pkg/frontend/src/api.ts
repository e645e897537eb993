/** Thin typed wrapper over the gateway's REST surface. */

import {
  EventsPage,
  ReasoningEntry,
  RosterEntry,
  SessionReport,
  SessionSummary,
  TimelineEvent,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

export interface AddAgentForm {
  name: string;
  role_name: string;
  persona?: string;
  provider?: string;
}

export class GatewayApi {
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl: string, fetchImpl?: typeof fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((...args) => fetch(...args));
  }

  // admin token is passed per call and lives only in the caller's memory
  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    token?: string,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (token) headers["authorization"] = `Bearer ${token}`;
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }
    if (!resp.ok) {
      const detail =
        parsed !== null && typeof parsed === "object" && "detail" in parsed
          ? String((parsed as { detail: unknown }).detail)
          : text || resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return parsed as T;
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/sessions");
  }

  createSession(config: unknown, token: string): Promise<{ id: string }> {
    return this.request("POST", "/sessions", { config }, token);
  }

  createSessionFromAsset(asset: string, token: string): Promise<{ id: string }> {
    return this.request("POST", "/sessions", { config_asset: asset }, token);
  }

  getEvents(sessionId: string, since = 0): Promise<EventsPage> {
    return this.request("GET", `/sessions/${sessionId}/events?since=${since}`);
  }

  sendMessage(sessionId: string, author: string, text: string): Promise<TimelineEvent> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { author, text });
  }

  sendTyping(sessionId: string, author: string): Promise<TimelineEvent> {
    return this.request("POST", `/sessions/${sessionId}/typing`, { author });
  }

  getRoster(sessionId: string, token?: string): Promise<{ agents: RosterEntry[] }> {
    return this.request("GET", `/sessions/${sessionId}/agents`, undefined, token);
  }

  addAgent(sessionId: string, form: AddAgentForm, token: string): Promise<TimelineEvent> {
    return this.request("POST", `/sessions/${sessionId}/agents`, form, token);
  }

  getReasoning(
    sessionId: string,
    agent: string,
    token: string,
  ): Promise<{ agent: string; entries: ReasoningEntry[] }> {
    return this.request(
      "GET",
      `/sessions/${sessionId}/agents/${encodeURIComponent(agent)}/reasoning`,
      undefined,
      token,
    );
  }

  getReport(sessionId: string): Promise<SessionReport> {
    return this.request("GET", `/sessions/${sessionId}/report`);
  }

  stopSession(sessionId: string, token: string): Promise<{ status: string }> {
    return this.request("POST", `/sessions/${sessionId}/stop`, {}, token);
  }
}
