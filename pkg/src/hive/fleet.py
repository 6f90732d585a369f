"""Agent lifecycle management: spawn, kicks, health, respawn, renewal.

Sessions idle at a prompt and receive work orders from the kernel (the
executor model); they never self-schedule. Supervision lives here, never in
the agent: a 10 s poll catches crashes and ready/done sentinels, a 20 min
healthcheck catches stale heartbeats, a 6-day renewal recycles sessions,
and a respawn cap turns repeated failures into a single human page.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock, Instant
from .governor import KickOrder, Mode, ROLES

READY_TIMEOUT_SECS = 60.0
MAX_RESPAWNS = 3
HEARTBEAT_STALE_SECS = 1800.0
POLL_PERIOD_SECS = 10.0
HEALTHCHECK_PERIOD_SECS = 1200.0
RENEW_PERIOD_SECS = 6 * 24 * 3600.0

READY_SENTINEL = "@@READY@@"
_DONE_RE = re.compile(r"^@@DONE (\S+) (ok|fail)@@$")

STATES = ("stopped", "starting", "idle_ready", "busy", "stalled", "failed")


class FleetError(Exception):
    pass


class AgentUnavailable(FleetError):
    def __init__(self, state: str):
        super().__init__(f"agent unavailable in state {state}")
        self.state = state


class UnknownBackend(FleetError):
    pass


class UnknownAgent(FleetError):
    pass


def work_order_text(order: KickOrder, role: str, policy_path: str) -> str:
    return (
        f"@@KICK {order.kick_id} role={role} mode={order.mode.value} "
        f"queue={order.queue_snapshot} policy={policy_path}@@"
    )


class Session(Protocol):
    def deliver(self, text: str) -> None: ...

    def terminate(self) -> None: ...

    def alive(self) -> bool: ...

    def drain_output(self) -> list[str]: ...


# backend factory: (agent_name, policy_path) -> Session
BackendFactory = Callable[[str, str], Session]


@dataclass
class AgentRecord:
    name: str
    role: str
    backend_id: str
    policy_path: str
    pinned: bool = False
    session_state: str = "stopped"
    heartbeat_at: Optional[Instant] = None
    respawn_count: int = 0
    last_kick: Optional[Instant] = None
    session_started_at: Optional[Instant] = None
    self_scheduled: bool = False
    # internal bookkeeping
    session: Optional[Session] = None
    current_kick_id: Optional[str] = None
    busy_since: Optional[Instant] = None
    pending_renew: bool = False
    pending_switch: Optional[str] = None
    recovering: bool = False


@dataclass
class KickResult:
    status: str  # delivered | skipped | unavailable
    detail: str = ""


class Fleet:
    def __init__(
        self,
        clock: Clock,
        bus: EventBus,
        run_dir: str | Path,
        ready_timeout: float = READY_TIMEOUT_SECS,
        max_respawns: int = MAX_RESPAWNS,
        heartbeat_stale_secs: float = HEARTBEAT_STALE_SECS,
        metrics_sink: Optional[Callable[[str, dict, Instant], None]] = None,
    ):
        self.clock = clock
        self.bus = bus
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.ready_timeout = ready_timeout
        self.max_respawns = max_respawns
        self.heartbeat_stale_secs = heartbeat_stale_secs
        self.metrics_sink = metrics_sink
        self.agents: dict[str, AgentRecord] = {}
        self.backends: dict[str, BackendFactory] = {}
        self._pins_path = self.run_dir / "pins.json"

    # -- registry -------------------------------------------------------

    def register_backend(self, backend_id: str, factory: BackendFactory) -> None:
        self.backends[backend_id] = factory

    def add_agent(
        self,
        name: str,
        role: str,
        backend_id: str,
        policy_path: str,
        self_scheduled: bool = False,
    ) -> AgentRecord:
        if role not in ROLES:
            raise FleetError(f"unknown role {role!r}")
        agent = AgentRecord(
            name=name,
            role=role,
            backend_id=backend_id,
            policy_path=policy_path,
            self_scheduled=self_scheduled,
        )
        pins = self._load_pins()
        if name in pins:
            agent.backend_id = pins[name]
            agent.pinned = True
        self.agents[name] = agent
        return agent

    def get(self, name: str) -> AgentRecord:
        agent = self.agents.get(name)
        if agent is None:
            raise UnknownAgent(name)
        return agent

    def _load_pins(self) -> dict:
        if self._pins_path.exists():
            return json.loads(self._pins_path.read_text(encoding="utf-8"))
        return {}

    def _save_pin(self, name: str, backend_id: str) -> None:
        pins = self._load_pins()
        pins[name] = backend_id
        self._pins_path.write_text(json.dumps(pins, indent=1), encoding="utf-8")

    def heartbeat_path(self, name: str) -> Path:
        return self.run_dir / f"heartbeat.{name}"

    # -- lifecycle ------------------------------------------------------

    def spawn(self, name: str) -> AgentRecord:
        agent = self.get(name)
        if agent.session_state not in ("stopped", "failed"):
            raise FleetError(f"cannot spawn agent in state {agent.session_state}")
        factory = self.backends.get(agent.backend_id)
        if factory is None:
            raise UnknownBackend(agent.backend_id)
        now = self.clock.now()
        agent.session_state = "starting"
        agent.session_started_at = now
        agent.heartbeat_at = now
        self.heartbeat_path(name).write_text(str(now), encoding="utf-8")
        self._emit(eb.SPAWN, agent)
        try:
            agent.session = factory(name, agent.policy_path)
        except Exception as exc:
            agent.session = None
            self._emit(eb.CRASH, agent, {"phase": "start", "error": str(exc)})
            self.respawn(name)
        return agent

    def kick(self, name: str, order: KickOrder) -> KickResult:
        agent = self.get(name)
        if agent.session_state == "busy":
            self._emit(eb.KICK_SKIPPED, agent, {"kick_id": order.kick_id, "reason": "busy"})
            return KickResult(status="skipped", detail="busy")
        if agent.session_state != "idle_ready" or agent.session is None:
            raise AgentUnavailable(agent.session_state)
        now = self.clock.now()
        agent.session.deliver(work_order_text(order, agent.role, agent.policy_path))
        agent.session_state = "busy"
        agent.last_kick = now
        agent.current_kick_id = order.kick_id
        agent.busy_since = now
        self._emit(eb.KICK, agent, {"kick_id": order.kick_id, "source": order.source})
        return KickResult(status="delivered", detail=order.kick_id)

    def dispatch(self, order: KickOrder) -> list[KickResult]:
        """Fan a governor kick order out to every kickable agent of its role."""
        results = []
        for agent in self.agents.values():
            if agent.role != order.role or agent.self_scheduled:
                continue
            if agent.session_state in ("idle_ready", "busy"):
                results.append(self.kick(agent.name, order))
        return results

    # -- supervision ----------------------------------------------------

    def supervisor_poll(self) -> list[FleetEvent]:
        """10 s loop: crash detection, ready/done sentinels, ready timeouts."""
        events: list[FleetEvent] = []
        now = self.clock.now()
        for agent in list(self.agents.values()):
            if agent.session is None:
                continue
            for line in agent.session.drain_output():
                events.extend(self._handle_output(agent, line))
            if agent.session_state in ("stopped", "failed"):
                continue
            if not agent.session.alive():
                events.append(self._emit(eb.CRASH, agent, {"phase": agent.session_state}))
                agent.recovering = True
                agent.session_state = "stopped"
                self.respawn(agent.name)
                continue
            if (
                agent.session_state == "starting"
                and agent.session_started_at is not None
                and now - agent.session_started_at > self.ready_timeout
            ):
                events.append(self._emit(eb.CRASH, agent, {"phase": "ready_timeout"}))
                agent.session.terminate()
                agent.session_state = "stopped"
                agent.recovering = True
                self.respawn(agent.name)
        return events

    def _handle_output(self, agent: AgentRecord, line: str) -> list[FleetEvent]:
        events: list[FleetEvent] = []
        if line == READY_SENTINEL and agent.session_state == "starting":
            agent.session_state = "idle_ready"
            events.append(self._emit(eb.READY, agent))
            if agent.recovering:
                agent.recovering = False
                events.append(self._emit(eb.RECOVERY, agent))
            return events
        m = _DONE_RE.match(line)
        if m and agent.session_state == "busy":
            kick_id, outcome = m.groups()
            now = self.clock.now()
            busy_seconds = now - (agent.busy_since or now)
            agent.session_state = "idle_ready"
            agent.current_kick_id = None
            agent.busy_since = None
            events.append(
                self._emit(
                    eb.COMPLETION,
                    agent,
                    {"kick_id": kick_id, "outcome": outcome, "busy_seconds": busy_seconds},
                )
            )
            if self.metrics_sink is not None:
                self.metrics_sink(agent.name, {"busy_seconds": busy_seconds}, now)
            # deferred maintenance happens only between work orders
            if agent.pending_switch is not None:
                target = agent.pending_switch
                agent.pending_switch = None
                self._apply_switch(agent, target)
            elif agent.pending_renew:
                agent.pending_renew = False
                self._recycle(agent, eb.RENEW)
        return events

    def healthcheck(self) -> list[FleetEvent]:
        """20 min loop: stale heartbeats get the session killed and respawned."""
        events: list[FleetEvent] = []
        now = self.clock.now()
        for agent in list(self.agents.values()):
            if agent.session_state not in ("starting", "idle_ready", "busy"):
                continue
            hb = self._read_heartbeat(agent.name)
            agent.heartbeat_at = hb
            if hb is None or now - hb > self.heartbeat_stale_secs:
                age = None if hb is None else now - hb
                events.append(self._emit(eb.STALL, agent, {"heartbeat_age": age}))
                if agent.session is not None:
                    agent.session.terminate()
                agent.session_state = "stopped"
                agent.recovering = True
                self.respawn(agent.name)
        return events

    def _read_heartbeat(self, name: str) -> Optional[Instant]:
        path = self.heartbeat_path(name)
        try:
            return float(path.read_text(encoding="utf-8").strip())
        except (OSError, ValueError):
            return None

    def respawn(self, name: str) -> AgentRecord:
        agent = self.get(name)
        if agent.session_state == "failed":
            return agent
        if agent.respawn_count >= self.max_respawns:
            agent.session_state = "failed"
            if agent.session is not None:
                agent.session.terminate()
                agent.session = None
            self._emit(
                eb.RESPAWN_CAP,
                agent,
                {"respawn_count": agent.respawn_count, "message": "manual intervention needed"},
            )
            return agent
        if agent.session is not None:
            agent.session.terminate()
            agent.session = None
        agent.respawn_count += 1
        agent.session_state = "stopped"
        self._emit(eb.RESPAWN, agent, {"respawn_count": agent.respawn_count})
        if self.metrics_sink is not None:
            self.metrics_sink(agent.name, {"restarts": 1}, self.clock.now())
        return self.spawn(name)

    def renew(self) -> list[FleetEvent]:
        """6-day planned recycle; accounting-neutral, defers on busy agents."""
        events: list[FleetEvent] = []
        for agent in list(self.agents.values()):
            if agent.session_state == "busy":
                agent.pending_renew = True
            elif agent.session_state == "idle_ready":
                events.append(self._recycle(agent, eb.RENEW))
        return events

    def _recycle(self, agent: AgentRecord, kind: str) -> FleetEvent:
        if agent.session is not None:
            agent.session.terminate()
            agent.session = None
        agent.session_state = "stopped"
        event = self._emit(kind, agent)
        self.spawn(agent.name)
        return event

    def switch_backend(self, name: str, backend_id: str) -> AgentRecord:
        agent = self.get(name)
        if backend_id not in self.backends:
            raise UnknownBackend(backend_id)
        agent.pinned = True
        self._save_pin(name, backend_id)
        if agent.session_state == "busy":
            agent.pending_switch = backend_id
            self._emit(eb.BACKEND_SWITCH, agent, {"backend_id": backend_id, "deferred": True})
        else:
            self._apply_switch(agent, backend_id)
        return agent

    def _apply_switch(self, agent: AgentRecord, backend_id: str) -> None:
        agent.backend_id = backend_id
        self._emit(eb.BACKEND_SWITCH, agent, {"backend_id": backend_id, "deferred": False})
        if agent.session_state in ("starting", "idle_ready", "stalled"):
            if agent.session is not None:
                agent.session.terminate()
                agent.session = None
            agent.session_state = "stopped"
            self.spawn(agent.name)

    def reset_failed(self, name: str) -> AgentRecord:
        """Manual operator reset: clears failure accounting and respawns."""
        agent = self.get(name)
        if agent.session_state != "failed":
            raise FleetError("agent is not failed")
        agent.respawn_count = 0
        agent.session_state = "stopped"
        return self.spawn(name)

    def terminate_all(self) -> None:
        for agent in self.agents.values():
            if agent.session is not None:
                agent.session.terminate()
                agent.session = None
            if agent.session_state not in ("failed",):
                agent.session_state = "stopped"

    def _emit(self, kind: str, agent: AgentRecord, payload: Optional[dict] = None) -> FleetEvent:
        event = FleetEvent(
            at=self.clock.now(), kind=kind, agent=agent.name, payload=payload or {}
        )
        self.bus.publish(event)
        return event
