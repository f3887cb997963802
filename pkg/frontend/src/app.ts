/** Controller: wires the gateway, the state store, and the view.
 *
 * One stream feeds one store feeds one render pass; commands flow through
 * a single pending slot so only one write can be in flight, and every
 * write passes the confirmation dialog first.
 */

import { validateCommand } from "./bounds.js";
import { GatewayClient } from "./gateway.js";
import {
  applySnapshot,
  failChat,
  initialState,
  markDisconnected,
  pushQuery,
  resolveChat,
  type DashboardState,
} from "./state.js";
import { buildLayout, renderChat, renderPanels } from "./render.js";

export class DashboardApp {
  readonly state: DashboardState = initialState();
  private readonly root: HTMLElement;
  private readonly gateway: GatewayClient;

  constructor(root: HTMLElement, gateway: GatewayClient) {
    this.root = root;
    this.gateway = gateway;
    buildLayout(root);
    this.bindCommandForm();
    this.bindChatForm();
    this.refresh();
  }

  /** Begin consuming the live stream; resolves when stop() is called. */
  start(): Promise<void> {
    return this.gateway.stream({
      onSnapshot: (snap) => {
        if (applySnapshot(this.state, snap)) {
          this.refresh();
        }
      },
      onDisconnect: () => {
        markDisconnected(this.state);
        this.refresh();
      },
    });
  }

  stop(): void {
    this.gateway.stop();
  }

  refresh(): void {
    renderPanels(this.root, this.state);
    renderChat(this.root, this.state);
  }

  // -- commands ------------------------------------------------------------

  private el<T extends HTMLElement>(sel: string): T {
    return this.root.querySelector(sel) as T;
  }

  private bindCommandForm(): void {
    this.el<HTMLFormElement>("#command-form").addEventListener(
      "submit",
      (ev) => {
        ev.preventDefault();
        const node = this.el<HTMLSelectElement>("#command-node").value;
        const value = Number(this.el<HTMLInputElement>("#command-value").value);
        this.requestCommand(node, value);
      },
    );
    this.el<HTMLButtonElement>("#confirm-yes").addEventListener("click", () => {
      void this.confirmPending();
    });
    this.el<HTMLButtonElement>("#confirm-no").addEventListener("click", () => {
      this.state.pendingCommand = null;
      this.el<HTMLElement>("#confirm-dialog").hidden = true;
    });
  }

  /** Validate and stage a command; the dialog is mandatory for all writes. */
  requestCommand(node: string, value: number): void {
    const errorBox = this.el<HTMLElement>("#command-error");
    const verdictBox = this.el<HTMLElement>("#command-verdict");
    errorBox.hidden = true;
    verdictBox.hidden = true;

    const refusal = validateCommand(node, value);
    if (refusal !== null) {
      errorBox.textContent = `rejected: ${refusal}`;
      errorBox.hidden = false;
      return;
    }
    const last = this.state.lastAcked;
    if (last && last.node === node && last.value === value) {
      verdictBox.textContent = `${node} already at ${value}; nothing sent`;
      verdictBox.hidden = false;
      return;
    }
    if (this.state.pendingCommand) {
      return; // one write in flight at a time
    }
    this.state.pendingCommand = { node, value };
    this.el<HTMLElement>("#confirm-text").textContent =
      `Write ${value} to ${node}?`;
    this.el<HTMLElement>("#confirm-dialog").hidden = false;
  }

  /** Send the staged command after the operator confirms. */
  async confirmPending(): Promise<void> {
    const pending = this.state.pendingCommand;
    this.el<HTMLElement>("#confirm-dialog").hidden = true;
    if (!pending) {
      return;
    }
    const verdictBox = this.el<HTMLElement>("#command-verdict");
    const errorBox = this.el<HTMLElement>("#command-error");
    try {
      const verdict = await this.gateway.command(pending.node, pending.value);
      if (verdict.ok) {
        this.state.lastAcked = pending;
        verdictBox.textContent = `accepted: ${pending.node} ← ${pending.value}`;
        verdictBox.hidden = false;
      } else {
        errorBox.textContent = `${verdict.err}: ${verdict.detail}`;
        errorBox.hidden = false;
      }
    } catch (exc) {
      errorBox.textContent = `command failed: ${(exc as Error).message}`;
      errorBox.hidden = false;
    } finally {
      this.state.pendingCommand = null;
    }
  }

  // -- assistant -----------------------------------------------------------

  private bindChatForm(): void {
    const input = this.el<HTMLInputElement>("#chat-input");
    const send = this.el<HTMLButtonElement>("#chat-send");
    input.addEventListener("input", () => {
      send.disabled = input.value.trim() === "";
    });
    this.el<HTMLFormElement>("#chat-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      const query = input.value.trim();
      if (query === "") {
        return;
      }
      input.value = "";
      send.disabled = true;
      void this.ask(query);
    });
    this.el<HTMLElement>("#chat-log").addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      if (target.classList.contains("retry")) {
        const entry = this.state.chat[Number(target.dataset["index"])];
        if (entry) {
          entry.status = "pending";
          this.refresh();
          void this.askInto(entry);
        }
      }
    });
  }

  async ask(query: string): Promise<void> {
    const entry = pushQuery(this.state, query);
    this.refresh();
    await this.askInto(entry);
  }

  private async askInto(
    entry: ReturnType<typeof pushQuery>,
  ): Promise<void> {
    try {
      const reply = await this.gateway.assist(entry.query);
      if (reply.ok) {
        resolveChat(
          entry,
          reply.response ?? "",
          reply.advisory ?? null,
          reply.fallback ?? false,
        );
      } else {
        failChat(entry, `${reply.err}: ${reply.detail}`);
      }
    } catch (exc) {
      failChat(entry, (exc as Error).message);
    }
    this.refresh();
  }
}
