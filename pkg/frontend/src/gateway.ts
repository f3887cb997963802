/** HTTP client for the facility gateway.
 *
 * All traffic goes through one injected `fetch`, so tests can script the
 * whole server.  The stream reader parses server-sent events off the
 * response body and reconnects with exponential backoff after any break.
 */

import type { AssistReply, CommandVerdict, Snapshot } from "./types.js";

export type FetchFn = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface GatewayOptions {
  fetchFn?: FetchFn;
  /** First reconnect delay; doubles per attempt up to 16x. */
  backoffMs?: number;
  /** Assistant request budget before the retry affordance shows. */
  assistTimeoutMs?: number;
}

export interface StreamHandlers {
  onSnapshot: (snap: Snapshot) => void;
  onDisconnect: () => void;
}

export class GatewayClient {
  private readonly base: string;
  private readonly fetchFn: FetchFn;
  private readonly backoffMs: number;
  private readonly assistTimeoutMs: number;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(base: string, opts: GatewayOptions = {}) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = opts.fetchFn ?? ((i, init) => fetch(i, init));
    this.backoffMs = opts.backoffMs ?? 500;
    this.assistTimeoutMs = opts.assistTimeoutMs ?? 15000;
  }

  async state(): Promise<Snapshot> {
    const res = await this.fetchFn(`${this.base}/api/state`);
    return (await res.json()) as Snapshot;
  }

  async command(node: string, value: number): Promise<CommandVerdict> {
    const res = await this.fetchFn(`${this.base}/api/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ node, value }),
    });
    return (await res.json()) as CommandVerdict;
  }

  async assist(query: string): Promise<AssistReply> {
    const request = this.fetchFn(`${this.base}/api/assist`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query }),
    }).then(async (res) => (await res.json()) as AssistReply);
    const timeout = new Promise<never>((_, reject) => {
      setTimeout(
        () => reject(new Error("assistant request timed out")),
        this.assistTimeoutMs,
      );
    });
    return Promise.race([request, timeout]);
  }

  /** Consume `/api/stream` until `stop()`; reconnects forever. */
  async stream(handlers: StreamHandlers): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      try {
        const res = await this.fetchFn(`${this.base}/api/stream`);
        if (!res.ok || !res.body) {
          throw new Error(`stream endpoint returned ${res.status}`);
        }
        attempt = 0;
        await this.readEvents(res.body, handlers.onSnapshot);
      } catch {
        // fall through to the reconnect path
      }
      if (this.stopped) {
        break;
      }
      handlers.onDisconnect();
      const delay = this.backoffMs * Math.min(16, 2 ** attempt);
      attempt += 1;
      await new Promise<void>((resolve) => {
        this.timer = setTimeout(resolve, delay);
      });
    }
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
  }

  private async readEvents(
    body: ReadableStream<Uint8Array>,
    onSnapshot: (snap: Snapshot) => void,
  ): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      while (!this.stopped) {
        const { done, value } = await reader.read();
        if (done) {
          break;
        }
        buffer += decoder.decode(value, { stream: true });
        let cut;
        while ((cut = buffer.indexOf("\n\n")) >= 0) {
          const event = buffer.slice(0, cut);
          buffer = buffer.slice(cut + 2);
          for (const line of event.split("\n")) {
            if (line.startsWith("data: ")) {
              onSnapshot(JSON.parse(line.slice(6)) as Snapshot);
            }
          }
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}
