/** The single dashboard state store.
 *
 * One object receives every network event; rendering reads it and nothing
 * else.  Live values, twin expectations (`dt_` nodes), a ten-minute history
 * ring, the pending command, and the chat transcript all live here.
 */

import type {
  Advisory,
  ChatEntry,
  ConnectionStatus,
  NodeEntry,
  PendingCommand,
  Snapshot,
} from "./types.js";

/** Ten minutes of 1 Hz snapshots. */
export const HISTORY_LIMIT = 600;

export interface DashboardState {
  /** Latest live readings, plain channel ids. */
  live: Record<string, NodeEntry>;
  /** Latest twin expectations, plain channel ids (dt_ prefix stripped). */
  twin: Record<string, NodeEntry>;
  /** Rolling ring of snapshot history, newest last, length <= 600. */
  history: Snapshot[];
  /** Server time of the newest accepted snapshot. */
  lastT: number;
  connection: ConnectionStatus;
  pendingCommand: PendingCommand | null;
  /** Last command the server acknowledged, for idempotent resubmission. */
  lastAcked: PendingCommand | null;
  chat: ChatEntry[];
}

export function initialState(): DashboardState {
  return {
    live: {},
    twin: {},
    history: [],
    lastT: 0,
    connection: "connecting",
    pendingCommand: null,
    lastAcked: null,
    chat: [],
  };
}

/** Fold one snapshot in; stale-timestamped snapshots are dropped so the
 * live view only ever moves forward. Returns true when state changed. */
export function applySnapshot(state: DashboardState, snap: Snapshot): boolean {
  if (snap.t < state.lastT) {
    return false;
  }
  state.lastT = snap.t;
  for (const [id, entry] of Object.entries(snap.nodes)) {
    if (id.startsWith("dt_")) {
      state.twin[id.slice(3)] = entry;
    } else {
      state.live[id] = entry;
    }
  }
  state.history.push(snap);
  if (state.history.length > HISTORY_LIMIT) {
    state.history.splice(0, state.history.length - HISTORY_LIMIT);
  }
  state.connection = "live";
  return true;
}

export function markDisconnected(state: DashboardState): void {
  state.connection = "disconnected";
}

/** Expected-minus-live difference for a channel, when both sides exist. */
export function deltaFor(state: DashboardState, id: string): number | null {
  const live = state.live[id]?.value;
  const expected = state.twin[id]?.value;
  if (
    live === null || live === undefined ||
    expected === null || expected === undefined
  ) {
    return null;
  }
  return expected - live;
}

export function pushQuery(state: DashboardState, query: string): ChatEntry {
  const entry: ChatEntry = { query, status: "pending" };
  state.chat.push(entry);
  return entry;
}

export function resolveChat(
  entry: ChatEntry,
  response: string,
  advisory: Advisory | null,
  fallback: boolean,
): void {
  entry.status = "done";
  entry.response = response;
  entry.advisory = advisory;
  entry.fallback = fallback;
}

export function failChat(entry: ChatEntry, error: string): void {
  entry.status = "error";
  entry.error = error;
}
