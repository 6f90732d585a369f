import { kickAgent, switchBackend } from "./actions";
import { clampIntensity, gaugeSvg } from "./gauge";
import { sparklineSvg } from "./sparkline";
import type {
  AgentView,
  ConnectionState,
  SparklinePayload,
  StatusSnapshot,
} from "./types";

export const BACKEND_CHOICES = ["sim", "sim2", "claude", "gemini", "copilot", "goose"];

const SPARK_METRICS = ["busy_seconds", "restarts"];

function el(html: string): HTMLElement {
  const tpl = document.createElement("template");
  tpl.innerHTML = html.trim();
  return tpl.content.firstElementChild as HTMLElement;
}

function escapeHtml(text: string): string {
  const span = document.createElement("span");
  span.textContent = text;
  return span.innerHTML;
}

/** The whole UI: renders snapshots, fires actions, never simulates state. */
export class App {
  private pending = new Set<string>();
  private sparkCache = new Map<string, SparklinePayload>();

  constructor(private root: HTMLElement) {
    this.root.innerHTML = `
      <div id="connection" class="connection live">live</div>
      <header class="topbar">
        <span id="mode" class="mode-badge"></span>
        <span id="queue" class="queue"></span>
      </header>
      <section class="panel">
        <div id="gauge"></div>
        <div id="intensity" class="intensity"></div>
        <div id="coverage" class="coverage"></div>
      </section>
      <section class="panel">
        <table class="agents">
          <thead>
            <tr><th>agent</th><th>role</th><th>backend</th><th>state</th>
                <th>history</th><th>actions</th></tr>
          </thead>
          <tbody id="agents"></tbody>
        </table>
      </section>
      <section class="panel">
        <ul id="repos" class="repos"></ul>
      </section>
      <div id="toast" class="toast" hidden></div>`;
  }

  setConnection(state: ConnectionState): void {
    const banner = this.root.querySelector("#connection") as HTMLElement;
    banner.textContent = state;
    banner.className = `connection ${state}`;
  }

  toast(message: string, ok = true): void {
    const toast = this.root.querySelector("#toast") as HTMLElement;
    toast.textContent = message;
    toast.className = `toast ${ok ? "ok" : "error"}`;
    toast.hidden = false;
  }

  applySparklines(payload: SparklinePayload): void {
    this.sparkCache.set(payload.agent, payload);
    const cell = this.root.querySelector(`[data-spark="${payload.agent}"]`);
    if (cell) cell.innerHTML = this.sparkHtml(payload.agent);
  }

  apply(snap: StatusSnapshot): void {
    const mode = this.root.querySelector("#mode") as HTMLElement;
    mode.textContent = snap.governor.mode;
    mode.className = `mode-badge mode-${snap.governor.mode.toLowerCase()}`;
    (this.root.querySelector("#queue") as HTMLElement).textContent =
      `queue ${snap.governor.queue_size}`;

    (this.root.querySelector("#gauge") as HTMLElement).innerHTML = gaugeSvg(snap.intensity);
    (this.root.querySelector("#intensity") as HTMLElement).textContent =
      `intensity ${clampIntensity(snap.intensity).toFixed(2)}`;

    const cov = this.root.querySelector("#coverage") as HTMLElement;
    cov.textContent =
      snap.coverage.current_pct === null
        ? "coverage n/a"
        : `coverage ${snap.coverage.current_pct.toFixed(1)}% of ${snap.coverage.target_pct.toFixed(0)}%`;

    const repos = this.root.querySelector("#repos") as HTMLElement;
    repos.innerHTML = Object.entries(snap.repos)
      .map(([repo, n]) => `<li>${escapeHtml(repo)}: ${n}</li>`)
      .join("");

    const tbody = this.root.querySelector("#agents") as HTMLElement;
    tbody.innerHTML = "";
    for (const agent of snap.agents) {
      tbody.appendChild(this.agentRow(agent));
    }
  }

  private sparkHtml(agent: string): string {
    const payload = this.sparkCache.get(agent);
    return SPARK_METRICS.map((metric) =>
      sparklineSvg(payload?.series[metric] ?? [], metric),
    ).join("");
  }

  private agentRow(agent: AgentView): HTMLElement {
    const pin = agent.pinned ? `<span class="pin-badge" title="backend pinned">pinned</span>` : "";
    const options = BACKEND_CHOICES.map(
      (b) => `<option value="${b}"${b === agent.backend_id ? " selected" : ""}>${b}</option>`,
    ).join("");
    const row = el(`
      <tr data-agent="${escapeHtml(agent.name)}">
        <td class="name">${escapeHtml(agent.name)}</td>
        <td>${escapeHtml(agent.role)}</td>
        <td class="backend">${escapeHtml(agent.backend_id)} ${pin}</td>
        <td class="state state-${escapeHtml(agent.session_state)}">${escapeHtml(agent.session_state)}</td>
        <td data-spark="${escapeHtml(agent.name)}">${this.sparkHtml(agent.name)}</td>
        <td>
          <button class="kick" data-action="kick">kick</button>
          <select class="backend-select">${options}</select>
          <button class="switch" data-action="switch">switch</button>
        </td>
      </tr>`);
    const kickBtn = row.querySelector(".kick") as HTMLButtonElement;
    kickBtn.disabled = this.pending.has(`kick:${agent.name}`);
    kickBtn.addEventListener("click", () => this.onKick(agent.name, kickBtn));
    const switchBtn = row.querySelector(".switch") as HTMLButtonElement;
    const select = row.querySelector(".backend-select") as HTMLSelectElement;
    switchBtn.addEventListener("click", () => this.onSwitch(agent.name, select.value, switchBtn));
    return row;
  }

  private async onKick(name: string, button: HTMLButtonElement): Promise<void> {
    const key = `kick:${name}`;
    this.pending.add(key);
    button.disabled = true;
    const result = await kickAgent(name);
    this.pending.delete(key);
    button.disabled = false;
    this.toast(result.message, result.ok);
  }

  private async onSwitch(
    name: string,
    backendId: string,
    button: HTMLButtonElement,
  ): Promise<void> {
    button.disabled = true;
    const result = await switchBackend(name, backendId);
    button.disabled = false;
    this.toast(result.message, result.ok);
  }
}
