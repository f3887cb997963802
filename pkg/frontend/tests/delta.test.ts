import { describe, expect, it } from "vitest";

import { formatDelta, formatValue } from "../src/format.js";
import { applySnapshot, initialState } from "../src/state.js";
import { renderPanels } from "../src/render.js";
import { buildLayout } from "../src/render.js";
import { snapshotWithTwin } from "./mock_gateway.js";

describe("twin delta badges", () => {
  it("formats the reference demand-step delta as +11.32 °C", () => {
    expect(formatDelta("TF12", 26.39, 37.71)).toBe("+11.32 °C");
  });

  it("formats negative deltas with a real minus sign", () => {
    expect(formatDelta("TF12", 37.71, 26.39)).toBe("−11.32 °C");
  });

  it("renders the badge next to dt_TF12 from a scripted snapshot", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    buildLayout(root);
    const state = initialState();
    applySnapshot(state, snapshotWithTwin(1000));
    renderPanels(root, state);

    const row = root.querySelector('tr[data-node="dt_TF12"]') as HTMLElement;
    expect(row).not.toBeNull();
    const badge = row.querySelector(".delta") as HTMLElement;
    expect(badge.textContent).toBe("+11.32 °C");
    expect(badge.classList.contains("delta-up")).toBe(true);

    // rendered numerics are the received values at display precision
    const liveRow = root.querySelector('tr[data-node="TF12"]') as HTMLElement;
    expect(liveRow.querySelector(".val")?.textContent).toBe(
      formatValue("TF12", 26.39),
    );
    expect(row.querySelector(".val")?.textContent).toBe(
      formatValue("TF12", 37.71),
    );
  });

  it("marks twin values visually distinct from live values", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    buildLayout(root);
    const state = initialState();
    applySnapshot(state, snapshotWithTwin(1000));
    renderPanels(root, state);
    const twinCell = root.querySelector(
      'tr[data-node="dt_TF12"] .val',
    ) as HTMLElement;
    expect(twinCell.classList.contains("twin-val")).toBe(true);
    const liveCell = root.querySelector(
      'tr[data-node="TF12"] .val',
    ) as HTMLElement;
    expect(liveCell.classList.contains("twin-val")).toBe(false);
  });

  it("omits the badge when no live counterpart exists", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    buildLayout(root);
    const state = initialState();
    const snap = snapshotWithTwin(1000);
    delete snap.nodes["TF12"];
    applySnapshot(state, snap);
    renderPanels(root, state);
    const row = root.querySelector('tr[data-node="dt_TF12"]') as HTMLElement;
    expect(row.querySelector(".delta")).toBeNull();
  });
});
