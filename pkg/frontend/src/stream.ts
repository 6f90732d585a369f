import type { ConnectionState, StatusSnapshot } from "./types";

// SSE subscription with reconnect backoff. The caller sees every snapshot
// plus connection-state changes; there is no silent staleness.

const BACKOFF_START_MS = 1000;
const BACKOFF_MAX_MS = 30000;

export interface StreamHandlers {
  onSnapshot: (snap: StatusSnapshot) => void;
  onConnection: (state: ConnectionState) => void;
}

export class StreamController {
  private source: EventSource | null = null;
  private backoffMs = BACKOFF_START_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.source?.close();
    this.source = null;
  }

  private connect(): void {
    this.source = new EventSource(this.url);
    this.source.addEventListener("status", (event) => {
      this.backoffMs = BACKOFF_START_MS;
      this.handlers.onConnection("live");
      this.handlers.onSnapshot(JSON.parse((event as MessageEvent).data));
    });
    this.source.onerror = () => {
      this.source?.close();
      this.source = null;
      if (this.stopped) return;
      this.handlers.onConnection("reconnecting");
      this.retryTimer = setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    };
  }
}
