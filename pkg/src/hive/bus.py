"""In-process event bus carrying fleet events between modules.

Kicks, respawns, stalls, escalations, mode changes, claims and completions
all flow through here; the notifier, the gateway stream, and the audit
surfaces subscribe rather than being called directly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .clockwork import Instant

# Event kinds used across the kernel
KICK = "kick"
KICK_SKIPPED = "kick_skipped"
SPAWN = "spawn"
READY = "ready"
CRASH = "crash"
RESPAWN = "respawn"
RESPAWN_CAP = "respawn_cap"
STALL = "stall"
RECOVERY = "recovery"
RENEW = "renew"
MODE_CHANGE = "mode_change"
CLAIM = "claim"
COMPLETION = "completion"
ITEM_SKIPPED = "item_skipped"
ESCALATION = "escalation"
CONFIG_ERROR = "config_error"
DEGRADED_MEASUREMENT = "degraded_measurement"
BACKEND_SWITCH = "backend_switch"
METRICS = "metrics"


@dataclass(frozen=True)
class FleetEvent:
    at: Instant
    kind: str
    agent: Optional[str] = None
    item_id: Optional[str] = None
    payload: dict = field(default_factory=dict)


class EventBus:
    """Synchronous fan-out. Subscriber errors never propagate to publishers."""

    def __init__(self) -> None:
        self._subscribers: list[Callable[[FleetEvent], None]] = []
        self._lock = threading.Lock()

    def subscribe(self, handler: Callable[[FleetEvent], None]) -> None:
        with self._lock:
            self._subscribers.append(handler)

    def publish(self, event: FleetEvent) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
        for handler in subscribers:
            try:
                handler(event)
            except Exception:
                pass


class EventLog:
    """Subscriber that keeps every event; used by tests and sim reports."""

    def __init__(self, bus: EventBus) -> None:
        self.events: list[FleetEvent] = []
        bus.subscribe(self.events.append)

    def of_kind(self, kind: str) -> list[FleetEvent]:
        return [e for e in self.events if e.kind == kind]
