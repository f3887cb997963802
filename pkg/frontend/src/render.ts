/** DOM construction and refresh for the three-panel console:
 * live readings (left), twin expectations with delta badges (right),
 * assistant transcript (bottom), plus the command form and its mandatory
 * confirmation dialog.  Pure view code: reads state, writes DOM. */

import { WRITABLE_NODES } from "./bounds.js";
import { formatDelta, formatValue } from "./format.js";
import { deltaFor, type DashboardState } from "./state.js";
import type { Advisory, ChatEntry } from "./types.js";

/** Channels shown on the board, in panel order. */
export const DISPLAY_ORDER = [
  "TF11", "TF12", "TF13", "TF14", "TF15",
  "TF21", "TF22", "TF23", "TF24", "TF25",
  "TF31", "TF32",
  "TH1", "TH2", "TH3", "TH4",
  "PT1", "PT2", "PT3", "PT4",
  "FT1", "FT2", "FT3",
  "Heat_Power", "Elec_Power",
  "Heater_Voltage", "Heater_Current",
  "Heater_AO", "Pump1_AO", "Pump2_AO", "CR_AO", "Demand_Elec",
];

export function buildLayout(root: HTMLElement): void {
  root.innerHTML = `
    <div id="banner" class="banner" hidden>disconnected — reconnecting…</div>
    <div class="panels">
      <section class="panel" id="live-panel">
        <h2>Facility</h2>
        <table id="live-table"><tbody></tbody></table>
      </section>
      <section class="panel" id="twin-panel">
        <h2>Twin expectation</h2>
        <table id="twin-table"><tbody></tbody></table>
      </section>
    </div>
    <section class="panel" id="command-panel">
      <h2>Command</h2>
      <form id="command-form">
        <select id="command-node"></select>
        <input id="command-value" type="number" step="any" />
        <button id="command-submit" type="submit">Apply</button>
      </form>
      <div id="command-error" class="error" hidden></div>
      <div id="command-verdict" hidden></div>
      <div id="confirm-dialog" class="dialog" hidden>
        <p id="confirm-text"></p>
        <button id="confirm-yes">Confirm</button>
        <button id="confirm-no">Cancel</button>
      </div>
    </section>
    <section class="panel" id="chat-panel">
      <h2>Assistant</h2>
      <ol id="chat-log"></ol>
      <form id="chat-form">
        <input id="chat-input" type="text" placeholder="Ask about the facility…" />
        <button id="chat-send" type="submit" disabled>Send</button>
      </form>
    </section>`;
  const select = root.querySelector("#command-node") as HTMLSelectElement;
  for (const [node, spec] of Object.entries(WRITABLE_NODES)) {
    const opt = document.createElement("option");
    opt.value = node;
    opt.textContent = `${spec.label} (${node}, ${spec.unit})`;
    select.appendChild(opt);
  }
}

function rowHtml(id: string, state: DashboardState): string {
  const entry = state.live[id];
  const quality = entry?.quality ?? "bad";
  const text = formatValue(id, entry?.value ?? null);
  return (
    `<tr class="q-${quality}" data-node="${id}">` +
    `<td class="chan">${id}</td>` +
    `<td class="val">${text}</td>` +
    `<td class="quality">${quality === "good" ? "" : quality}</td></tr>`
  );
}

function twinRowHtml(id: string, state: DashboardState): string {
  const entry = state.twin[id];
  const text = formatValue(id, entry?.value ?? null);
  const delta = deltaFor(state, id);
  const badge =
    delta === null
      ? ""
      : `<span class="delta ${delta >= 0 ? "delta-up" : "delta-down"}">` +
        `${formatDelta(id, state.live[id]!.value!, state.twin[id]!.value!)}</span>`;
  return (
    `<tr data-node="dt_${id}">` +
    `<td class="chan">dt_${id}</td>` +
    `<td class="val twin-val">${text}</td>` +
    `<td class="delta-cell">${badge}</td></tr>`
  );
}

export function renderPanels(root: HTMLElement, state: DashboardState): void {
  const banner = root.querySelector("#banner") as HTMLElement;
  banner.hidden = state.connection !== "disconnected";
  const greyed = state.connection === "disconnected";
  (root.querySelector("#live-panel") as HTMLElement).classList.toggle(
    "greyed",
    greyed,
  );

  const liveBody = root.querySelector("#live-table tbody") as HTMLElement;
  liveBody.innerHTML = DISPLAY_ORDER.map((id) => rowHtml(id, state)).join("");

  const twinBody = root.querySelector("#twin-table tbody") as HTMLElement;
  const twinIds = DISPLAY_ORDER.filter((id) => state.twin[id] !== undefined);
  twinBody.innerHTML = twinIds.map((id) => twinRowHtml(id, state)).join("");
}

function advisoryHtml(advisory: Advisory): string {
  const flags = advisory.flags
    .map(
      (f) =>
        `<li class="flag sev-${f.severity}">[${f.severity.toUpperCase()}] ` +
        `${f.message}</li>`,
    )
    .join("");
  const recs = advisory.recommendations
    .map((r) => `<li class="rec">${r}</li>`)
    .join("");
  return (
    `<div class="advisory">` +
    `<ul class="flags">${flags || "<li>none</li>"}</ul>` +
    `<ul class="recs">${recs || "<li>none</li>"}</ul>` +
    `<div class="safe">Safe to proceed: ${advisory.safe_to_proceed}</div>` +
    `</div>`
  );
}

function chatEntryHtml(entry: ChatEntry, index: number): string {
  let body = "";
  if (entry.status === "pending") {
    body = `<div class="pending">…</div>`;
  } else if (entry.status === "error") {
    body =
      `<div class="error">${entry.error}</div>` +
      `<button class="retry" data-index="${index}">Retry</button>`;
  } else {
    body = `<div class="response">${entry.response ?? ""}</div>`;
    if (entry.advisory) {
      body += advisoryHtml(entry.advisory);
    }
  }
  return `<li class="chat-entry"><div class="query">${entry.query}</div>${body}</li>`;
}

export function renderChat(root: HTMLElement, state: DashboardState): void {
  const log = root.querySelector("#chat-log") as HTMLElement;
  log.innerHTML = state.chat
    .map((entry, i) => chatEntryHtml(entry, i))
    .join("");
}
