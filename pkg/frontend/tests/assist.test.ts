import { describe, expect, it } from "vitest";

import type { AssistReply } from "../src/types.js";
import { makeApp, q } from "./harness.js";
import { ScriptedGateway, waitFor } from "./mock_gateway.js";

const fallbackReply: AssistReply = {
  ok: true,
  response:
    "Advisory (rule-based fallback): control rod inserted while heater " +
    "shows electrical load.",
  advisory: {
    flags: [
      {
        code: "rod-inserted-energized",
        severity: "alarm",
        message:
          "Control rod fully inserted while heater electrical readings are nonzero",
        channel: "CR_AO",
        value: 100.0,
        limit: 0.0,
      },
      {
        code: "loop-overtemp",
        severity: "warning",
        message: "Loop temperature approaching limit",
        channel: "TF12",
        value: 78.2,
        limit: 80.0,
      },
    ],
    recommendations: ["Verify rod position indication against heater power."],
    safe_to_proceed: "no",
  },
  fallback: true,
};

describe("assistant panel", () => {
  it("renders a fallback advisory with alarm rows highlighted", async () => {
    const gw = new ScriptedGateway();
    gw.assistReplies.push(fallbackReply);
    const { app, root } = makeApp(gw);

    await app.ask("is it safe to raise power?");
    const log = q(root, "#chat-log");
    expect(log.textContent).toContain("is it safe to raise power?");
    expect(log.textContent).toContain("Advisory (rule-based fallback):");

    const alarm = log.querySelector(".flag.sev-alarm") as HTMLElement;
    expect(alarm).not.toBeNull();
    expect(alarm.textContent).toContain("[ALARM]");
    expect(alarm.textContent).toContain("Control rod fully inserted");
    const warning = log.querySelector(".flag.sev-warning") as HTMLElement;
    expect(warning.textContent).toContain("[WARNING]");
    expect(log.querySelector(".safe")?.textContent).toBe("Safe to proceed: no");
  });

  it("keeps send disabled while the query is empty", () => {
    const { root } = makeApp(new ScriptedGateway());
    const input = q(root, "#chat-input") as HTMLInputElement;
    const send = q(root, "#chat-send") as HTMLButtonElement;

    expect(send.disabled).toBe(true);
    input.value = "   ";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    expect(send.disabled).toBe(true);
    input.value = "status?";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    expect(send.disabled).toBe(false);
    input.value = "";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    expect(send.disabled).toBe(true);
  });

  it("submitting through the form posts the query and shows it pending", async () => {
    const gw = new ScriptedGateway();
    gw.assistReplies.push({ ok: true, response: "All readings nominal.", fallback: false });
    const { app, root } = makeApp(gw);

    const input = q(root, "#chat-input") as HTMLInputElement;
    input.value = "how is the loop?";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    (q(root, "#chat-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );

    expect(q(root, "#chat-log").textContent).toContain("how is the loop?");
    await waitFor(() => app.state.chat[0]?.status === "done");
    expect(q(root, "#chat-log").textContent).toContain("All readings nominal.");
    expect(gw.requests[0]?.body).toEqual({ query: "how is the loop?" });
    expect(input.value).toBe("");
  });

  it("offers a retry after a timeout, and the retry re-sends", async () => {
    const gw = new ScriptedGateway();
    gw.assistReplies.push("never"); // first attempt hangs past the budget
    gw.assistReplies.push({ ok: true, response: "Recovered.", fallback: false });
    const { app, root } = makeApp(gw);

    void app.ask("anyone home?");
    await waitFor(() => app.state.chat[0]?.status === "error");
    expect(app.state.chat[0]?.error).toBe("assistant request timed out");
    const retry = root.querySelector("#chat-log .retry") as HTMLButtonElement;
    expect(retry).not.toBeNull();

    retry.click();
    await waitFor(() => app.state.chat[0]?.status === "done");
    expect(q(root, "#chat-log").textContent).toContain("Recovered.");
    expect(
      gw.requests.filter((r) => r.url.endsWith("/api/assist")).length,
    ).toBe(2);
  });

  it("shows backend failures verbatim with a retry affordance", async () => {
    const gw = new ScriptedGateway();
    gw.assistReplies.push({
      ok: false,
      err: "BackendUnavailable",
      detail: "assistant backend returned 503",
    });
    const { app, root } = makeApp(gw);

    await app.ask("status?");
    expect(app.state.chat[0]?.status).toBe("error");
    expect(app.state.chat[0]?.error).toBe(
      "BackendUnavailable: assistant backend returned 503",
    );
    expect(root.querySelector("#chat-log .retry")).not.toBeNull();
  });
});
