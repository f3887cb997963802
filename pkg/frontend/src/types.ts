/** Wire types for the facility gateway (the HTTP face of the serve verb). */

export type Quality = "good" | "stale" | "bad";

export interface NodeEntry {
  value: number | null;
  /** Server timestamp of the value, epoch milliseconds. */
  t: number;
  quality: Quality;
  writable: boolean;
}

/** One `GET /api/state` response / one `GET /api/stream` event. */
export interface Snapshot {
  t: number;
  nodes: Record<string, NodeEntry>;
}

/** `POST /api/command` verdict; `err`/`detail` present when `ok` is false. */
export interface CommandVerdict {
  ok: boolean;
  err?: string;
  detail?: string;
}

export interface AdvisoryFlag {
  code: string;
  severity: "info" | "warning" | "alarm";
  message: string;
  channel: string | null;
  value: number | null;
  limit: number | null;
}

export interface Advisory {
  flags: AdvisoryFlag[];
  recommendations: string[];
  safe_to_proceed: "yes" | "no" | "conditional";
}

/** `POST /api/assist` reply. */
export interface AssistReply {
  ok: boolean;
  response?: string;
  advisory?: Advisory | null;
  fallback?: boolean;
  err?: string;
  detail?: string;
}

export type ConnectionStatus = "connecting" | "live" | "disconnected";

export interface PendingCommand {
  node: string;
  value: number;
}

export interface ChatEntry {
  query: string;
  status: "pending" | "done" | "error";
  response?: string;
  advisory?: Advisory | null;
  fallback?: boolean;
  error?: string;
}
