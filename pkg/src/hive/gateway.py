"""HTTP data plane for the strategic dashboard.

Read paths (status snapshot, SSE stream, sparklines, ledger view) never
mutate kernel state; the only mutating endpoints are per-agent kick and
backend switch, and both funnel through fleet operations. Snapshots are
published at most every 5 seconds, sooner on a governor mode change.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock, Instant
from .governor import Governor, KickOrder
from .fleet import AgentUnavailable, Fleet, UnknownAgent, UnknownBackend
from .ledger import Ledger

SNAPSHOT_PERIOD_SECS = 5.0
BUCKET_SECS = 300.0
WINDOW_SECS = 24 * 3600.0
BUCKETS_PER_WINDOW = int(WINDOW_SECS / BUCKET_SECS)  # 288
RECENT_WINDOW_SECS = 15 * 60.0
TRAILING_WINDOW_SECS = 24 * 3600.0
DEFAULT_PORT = 3001

SPARKLINE_METRICS = ("busy_seconds", "restarts")


class SparklineStore:
    """Rolling 24 h of 5-minute buckets per (agent, metric)."""

    def __init__(self, clock: Clock):
        self.clock = clock
        # (agent, metric) -> {bucket_index: value}
        self._buckets: dict[tuple[str, str], dict[int, float]] = {}

    def add(self, agent: str, metric: str, value: float, at: Instant) -> None:
        key = (agent, metric)
        bucket = int(at // BUCKET_SECS)
        buckets = self._buckets.setdefault(key, {})
        buckets[bucket] = buckets.get(bucket, 0.0) + value
        self._evict(buckets)

    def _evict(self, buckets: dict[int, float]) -> None:
        horizon = int((self.clock.now() - WINDOW_SECS) // BUCKET_SECS)
        for b in [b for b in buckets if b <= horizon]:
            del buckets[b]

    def series(self, agent: str, metric: str) -> list[dict]:
        buckets = self._buckets.get((agent, metric), {})
        self._evict(buckets)
        return [
            {"bucket_start": b * BUCKET_SECS, "value": buckets[b]}
            for b in sorted(buckets)
        ]


class TokenMeter:
    """Per-agent token samples; recent vs. trailing burn rates."""

    def __init__(self, clock: Clock):
        self.clock = clock
        self._samples: list[tuple[Instant, float]] = []

    def add(self, tokens: float, at: Instant) -> None:
        self._samples.append((at, tokens))
        horizon = self.clock.now() - TRAILING_WINDOW_SECS
        self._samples = [(t, v) for t, v in self._samples if t > horizon]

    def _rate(self, window: float) -> float:
        """Tokens per minute over the trailing window."""
        now = self.clock.now()
        total = sum(v for t, v in self._samples if t > now - window)
        return total / (window / 60.0)

    def recent_rate(self) -> float:
        return self._rate(RECENT_WINDOW_SECS)

    def trailing_rate(self) -> float:
        return self._rate(TRAILING_WINDOW_SECS)


def compute_intensity(meter: TokenMeter) -> float:
    """Recent vs. trailing burn-rate ratio; 1.0 with no baseline."""
    trailing = meter.trailing_rate()
    if trailing == 0:
        return 1.0
    return meter.recent_rate() / trailing


@dataclass
class CoverageConfig:
    path: Optional[Path] = None  # file holding a single percentage
    target_pct: float = 90.0

    def current_pct(self) -> Optional[float]:
        if self.path is None or not self.path.exists():
            return None
        try:
            return float(self.path.read_text(encoding="utf-8").strip().rstrip("%"))
        except ValueError:
            return None


class Dashboard:
    """Snapshot builder and metrics accumulator behind the HTTP layer."""

    def __init__(
        self,
        clock: Clock,
        fleet: Fleet,
        governor: Governor,
        ledger: Ledger,
        bus: EventBus,
        coverage: Optional[CoverageConfig] = None,
    ):
        self.clock = clock
        self.fleet = fleet
        self.governor = governor
        self.ledger = ledger
        self.coverage = coverage or CoverageConfig()
        self.sparklines = SparklineStore(clock)
        self.meter = TokenMeter(clock)
        self._subscribers: list[queue.Queue] = []
        self._sub_lock = threading.Lock()
        self._publish_timer = None
        bus.subscribe(self._on_event)

    # -- metrics ingestion ----------------------------------------------

    def record_metrics(self, agent: str, values: dict, at: Instant) -> None:
        if agent not in self.fleet.agents:
            raise UnknownAgent(agent)
        for metric in SPARKLINE_METRICS:
            if metric in values:
                self.sparklines.add(agent, metric, float(values[metric]), at)
        if "tokens" in values:
            self.meter.add(float(values["tokens"]), at)

    def _on_event(self, event: FleetEvent) -> None:
        if event.kind == eb.METRICS and event.agent in self.fleet.agents:
            self.record_metrics(event.agent, event.payload, event.at)
        elif event.kind == eb.MODE_CHANGE:
            self.publish_snapshot()  # sooner-on-mode-change

    # -- snapshots -------------------------------------------------------

    def snapshot(self) -> dict:
        now = self.clock.now()
        state = self.governor.state
        repos: dict[str, int] = {}
        for item in self.ledger.list():
            if item.status in ("open", "in_progress"):
                repos[item.repo] = repos.get(item.repo, 0) + 1
        agents = []
        for agent in self.fleet.agents.values():
            hb_age = None
            if agent.heartbeat_at is not None:
                hb_age = now - agent.heartbeat_at
            agents.append(
                {
                    "name": agent.name,
                    "role": agent.role,
                    "backend_id": agent.backend_id,
                    "pinned": agent.pinned,
                    "session_state": agent.session_state,
                    "heartbeat_age": hb_age,
                    "respawn_count": agent.respawn_count,
                    "last_kick": agent.last_kick,
                }
            )
        return {
            "at": now,
            "governor": {"mode": state.mode.value, "queue_size": state.queue_size},
            "repos": repos,
            "agents": agents,
            "coverage": {
                "current_pct": self.coverage.current_pct(),
                "target_pct": self.coverage.target_pct,
            },
            "intensity": compute_intensity(self.meter),
        }

    def start_publishing(self) -> None:
        if self._publish_timer is None:
            self._publish_timer = self.clock.every(SNAPSHOT_PERIOD_SECS, self.publish_snapshot)

    def stop_publishing(self) -> None:
        if self._publish_timer is not None:
            self._publish_timer.cancel()
            self._publish_timer = None

    def publish_snapshot(self) -> None:
        snap = self.snapshot()
        with self._sub_lock:
            for q in self._subscribers:
                q.put(snap)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        q.put(self.snapshot())  # one snapshot at connection
        with self._sub_lock:
            self._subscribers.append(q)
        return q

    def close_streams(self) -> None:
        """Wake every stream consumer with an end-of-stream marker."""
        with self._sub_lock:
            for q in self._subscribers:
                q.put(None)

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


def create_app(dashboard: Dashboard, static_dir: Optional[Path] = None):
    """FastAPI app exposing the dashboard contract."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse, StreamingResponse

    app = FastAPI(title="hive gateway")
    fleet = dashboard.fleet
    manual_ids = itertools.count(1)

    @app.get("/api/status")
    def status() -> dict:
        return dashboard.snapshot()

    @app.get("/api/stream")
    def stream():
        def events():
            q = dashboard.subscribe()
            try:
                while True:
                    snap = q.get()
                    if snap is None:
                        break
                    yield f"event: status\ndata: {json.dumps(snap)}\n\n"
            finally:
                dashboard.unsubscribe(q)

        return StreamingResponse(events(), media_type="text/event-stream")

    @app.get("/api/sparklines/{agent}")
    def sparklines(agent: str):
        if agent not in fleet.agents:
            return JSONResponse({"error": f"unknown agent {agent}"}, status_code=404)
        return {
            "agent": agent,
            "bucket_secs": BUCKET_SECS,
            "window_secs": WINDOW_SECS,
            "series": {
                metric: dashboard.sparklines.series(agent, metric)
                for metric in SPARKLINE_METRICS
            },
        }

    @app.post("/api/agents/{name}/kick")
    def kick(name: str):
        try:
            agent = fleet.get(name)
        except UnknownAgent:
            return JSONResponse({"error": f"unknown agent {name}"}, status_code=404)
        order = KickOrder(
            kick_id=f"manual-{next(manual_ids)}",
            role=agent.role,
            mode=dashboard.governor.state.mode,
            queue_snapshot=dashboard.governor.state.queue_size,
            issued_at=dashboard.clock.now(),
            source="manual",
            agent_name=name,
        )
        try:
            result = fleet.kick(name, order)
        except AgentUnavailable as exc:
            return JSONResponse(
                {"status": "unavailable", "detail": exc.state}, status_code=409
            )
        detail = result.detail
        if result.status == "skipped":
            detail = "skipped: busy"
        return {"status": result.status, "detail": detail}

    @app.post("/api/agents/{name}/backend")
    def switch(name: str, body: dict):
        backend_id = body.get("backend_id")
        if not backend_id:
            return JSONResponse({"error": "backend_id required"}, status_code=400)
        try:
            agent = fleet.switch_backend(name, backend_id)
        except UnknownAgent:
            return JSONResponse({"error": f"unknown agent {name}"}, status_code=404)
        except UnknownBackend:
            return JSONResponse({"error": f"unknown backend {backend_id}"}, status_code=400)
        return {
            "agent": name,
            "backend_id": backend_id,
            "pinned": agent.pinned,
            "deferred": agent.pending_switch == backend_id,
        }

    @app.get("/api/ledger")
    def ledger_view(status: Optional[str] = None, actor: Optional[str] = None, repo: Optional[str] = None):
        items = dashboard.ledger.list(status=status, actor=actor, repo=repo)
        return {"items": [i.to_dict() for i in items]}

    if static_dir is not None and static_dir.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
