// Dashboard contract tests against a snapshot recorded from the live
// gateway (test/fixtures/status.json), so the rendered shapes are the real
// wire format rather than hand-written approximations.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { App } from "../src/app";
import type { StatusSnapshot } from "../src/types";
import fixture from "./fixtures/status.json";
import sparkFixture from "./fixtures/sparklines.json";

function snapshot(): StatusSnapshot {
  return JSON.parse(JSON.stringify(fixture)) as StatusSnapshot;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

async function settle(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

let root: HTMLElement;
let app: App;

beforeEach(() => {
  root = document.createElement("div");
  document.body.appendChild(root);
  app = new App(root);
});

afterEach(() => {
  vi.restoreAllMocks();
  root.remove();
});

describe("snapshot rendering", () => {
  it("renders the governor mode", () => {
    app.apply(snapshot());
    expect(root.querySelector("#mode")?.textContent).toBe("QUIET");
    expect(root.querySelector("#queue")?.textContent).toBe("queue 3");
  });

  it("renders all four agents", () => {
    app.apply(snapshot());
    const rows = root.querySelectorAll("#agents tr");
    expect(rows.length).toBe(4);
    const names = [...rows].map((r) => r.querySelector(".name")?.textContent);
    expect(names).toEqual(["scanner-1", "scanner-2", "reviewer-1", "architect-1"]);
  });

  it("shows the gauge centered at intensity 1.0", () => {
    app.apply(snapshot());
    expect(root.querySelector("#intensity")?.textContent).toBe("intensity 1.00");
    const needle = root.querySelector(".gauge-needle");
    expect(needle?.getAttribute("transform")).toBe("rotate(0.0 100 100)");
  });

  it("re-render replaces stale data", () => {
    app.apply(snapshot());
    const next = snapshot();
    next.governor.mode = "SURGE";
    next.governor.queue_size = 25;
    app.apply(next);
    expect(root.querySelector("#mode")?.textContent).toBe("SURGE");
    expect(root.querySelector("#queue")?.textContent).toBe("queue 25");
  });

  it("shows the reconnecting banner", () => {
    app.setConnection("reconnecting");
    expect(root.querySelector("#connection")?.textContent).toBe("reconnecting");
    app.setConnection("live");
    expect(root.querySelector("#connection")?.textContent).toBe("live");
  });

  it("renders recorded sparkline payloads and empty placeholders", () => {
    app.apply(snapshot());
    app.applySparklines(JSON.parse(JSON.stringify(sparkFixture)));
    const cell = root.querySelector('[data-spark="scanner-1"]');
    expect(cell?.querySelectorAll(".spark-empty").length).toBe(2); // no samples yet
  });
});

describe("kick button", () => {
  it("POSTs to the kick endpoint and toasts delivery", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ status: "delivered", detail: "kick k1 delivered" }),
    );
    vi.stubGlobal("fetch", fetchMock);
    app.apply(snapshot());
    (root.querySelector('tr[data-agent="scanner-1"] .kick') as HTMLButtonElement).click();
    await settle();
    expect(fetchMock).toHaveBeenCalledWith("/api/agents/scanner-1/kick", { method: "POST" });
    expect(root.querySelector("#toast")?.textContent).toBe("kick k1 delivered");
  });

  it("surfaces skipped: busy verbatim", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(jsonResponse({ status: "skipped", detail: "skipped: busy" })),
    );
    app.apply(snapshot());
    (root.querySelector('tr[data-agent="scanner-1"] .kick') as HTMLButtonElement).click();
    await settle();
    expect(root.querySelector("#toast")?.textContent).toBe("skipped: busy");
  });

  it("toasts the server message on HTTP errors", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(jsonResponse({ status: "unavailable", detail: "failed" }, 409)),
    );
    app.apply(snapshot());
    (root.querySelector('tr[data-agent="scanner-1"] .kick') as HTMLButtonElement).click();
    await settle();
    const toast = root.querySelector("#toast");
    expect(toast?.textContent).toBe("failed");
    expect(toast?.className).toContain("error");
  });
});

describe("backend switch", () => {
  it("POSTs the backend id and shows the pin badge from the next snapshot", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ agent: "scanner-1", backend_id: "claude", pinned: true, deferred: false }),
    );
    vi.stubGlobal("fetch", fetchMock);
    app.apply(snapshot());
    expect(root.querySelector(".pin-badge")).toBeNull();

    const row = root.querySelector('tr[data-agent="scanner-1"]') as HTMLElement;
    (row.querySelector(".backend-select") as HTMLSelectElement).value = "claude";
    (row.querySelector(".switch") as HTMLButtonElement).click();
    await settle();
    expect(fetchMock).toHaveBeenCalledWith("/api/agents/scanner-1/backend", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ backend_id: "claude" }),
    });
    expect(root.querySelector("#toast")?.textContent).toBe("pinned to claude");

    // pinned state round-trips through the snapshot, never local mutation
    const next = snapshot();
    next.agents[0].backend_id = "claude";
    next.agents[0].pinned = true;
    app.apply(next);
    const badge = root.querySelector('tr[data-agent="scanner-1"] .pin-badge');
    expect(badge?.textContent).toBe("pinned");
  });

  it("marks deferred switches in the toast", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        jsonResponse({ agent: "scanner-1", backend_id: "gemini", pinned: true, deferred: true }),
      ),
    );
    app.apply(snapshot());
    const row = root.querySelector('tr[data-agent="scanner-1"]') as HTMLElement;
    (row.querySelector(".switch") as HTMLButtonElement).click();
    await settle();
    expect(root.querySelector("#toast")?.textContent).toBe(
      "pinned to gemini (deferred until idle)",
    );
  });
});
