import { App } from "./app";
import { StreamController } from "./stream";
import type { SparklinePayload, StatusSnapshot } from "./types";
import "./style.css";

const app = new App(document.getElementById("app") as HTMLElement);

async function refreshSparklines(snap: StatusSnapshot): Promise<void> {
  for (const agent of snap.agents) {
    try {
      const resp = await fetch(`/api/sparklines/${agent.name}`);
      if (resp.ok) app.applySparklines((await resp.json()) as SparklinePayload);
    } catch {
      // sparklines are decorative; the snapshot view stays intact
    }
  }
}

let lastSparkRefresh = 0;

const stream = new StreamController("/api/stream", {
  onSnapshot: (snap) => {
    app.apply(snap);
    if (snap.at - lastSparkRefresh >= 60) {
      lastSparkRefresh = snap.at;
      void refreshSparklines(snap);
    }
  },
  onConnection: (state) => app.setConnection(state),
});

stream.start();
