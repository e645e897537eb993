/**
 * Wire types for the teamline gateway.
 *
 * These mirror the JSON the gateway serves; the UI holds no state that
 * cannot be rebuilt from `GET /sessions/{id}/events?since=0`.
 */

export type EventKind =
  | "join"
  | "message"
  | "typing_started"
  | "file_created"
  | "system";

export interface TimelineEvent {
  seq: number;
  wall_time: number; // epoch milliseconds
  author: string;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface JoinPayload {
  name: string;
  role_name: string;
}

export interface MessagePayload {
  text: string;
}

export interface FilePayload {
  filename: string;
  file_kind: string; // "code" | "document"
  content: string;
}

export interface SystemPayload {
  note: string;
}

export interface EventsPage {
  head: number;
  status: string;
  events: TimelineEvent[];
}

export interface RosterEntry {
  name: string;
  role_name: string;
  kind?: string; // "human" | "ai", admin responses only
}

export interface SessionSummary {
  id: string;
  status: string;
  condition_name: string;
}

export interface ReasoningEntry {
  seq_at_decision: number;
  action: string;
  reasoning: string;
  content: string | null;
  malformed: boolean;
}

export interface SessionReport {
  status: string;
  end_reason: string | null;
  events: number;
  turns: number;
  messages_by_author: Record<string, number>;
  files: string[];
}

export function joinPayload(ev: TimelineEvent): JoinPayload {
  return ev.payload as unknown as JoinPayload;
}

export function messagePayload(ev: TimelineEvent): MessagePayload {
  return ev.payload as unknown as MessagePayload;
}

export function filePayload(ev: TimelineEvent): FilePayload {
  return ev.payload as unknown as FilePayload;
}

export function systemPayload(ev: TimelineEvent): SystemPayload {
  return ev.payload as unknown as SystemPayload;
}

export function isTimelineEvent(value: unknown): value is TimelineEvent {
  if (typeof value !== "object" || value === null) return false;
  const ev = value as Record<string, unknown>;
  return (
    typeof ev.seq === "number" &&
    typeof ev.wall_time === "number" &&
    typeof ev.author === "string" &&
    typeof ev.kind === "string" &&
    typeof ev.payload === "object" &&
    ev.payload !== null
  );
}
