// The only mutating calls the UI makes; everything else arrives via snapshots.

export interface ActionResult {
  ok: boolean;
  message: string;
}

export async function kickAgent(name: string): Promise<ActionResult> {
  try {
    const resp = await fetch(`/api/agents/${name}/kick`, { method: "POST" });
    const body = await resp.json();
    if (!resp.ok) {
      return { ok: false, message: body.detail ?? body.error ?? `HTTP ${resp.status}` };
    }
    return { ok: true, message: body.detail ?? body.status };
  } catch (err) {
    return { ok: false, message: `kick failed: ${err}` };
  }
}

export async function switchBackend(
  name: string,
  backendId: string,
): Promise<ActionResult> {
  try {
    const resp = await fetch(`/api/agents/${name}/backend`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ backend_id: backendId }),
    });
    const body = await resp.json();
    if (!resp.ok) {
      return { ok: false, message: body.error ?? `HTTP ${resp.status}` };
    }
    const suffix = body.deferred ? " (deferred until idle)" : "";
    return { ok: true, message: `pinned to ${body.backend_id}${suffix}` };
  } catch (err) {
    return { ok: false, message: `switch failed: ${err}` };
  }
}
