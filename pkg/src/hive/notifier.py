"""Escalation and lifecycle alerts routed to human channels.

Maps fleet events to notifications (stall -> warn, recovery -> info,
respawn cap / fix-attempt skip / escalation -> page) and delivers them to
configured channels: ntfy, Slack/Discord webhooks, or stdout. Delivery is
fire-and-forget with retry; a failed webhook never touches kernel state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock, Instant

SEVERITIES = ("info", "warn", "page")
DEDUPE_WINDOW_SECS = 3600.0
MAX_ATTEMPTS = 3
FIRST_BACKOFF_SECS = 0.5


def _sev_rank(severity: str) -> int:
    return SEVERITIES.index(severity)


@dataclass(frozen=True)
class Notification:
    severity: str
    title: str
    body: str
    source: str
    dedupe_key: str
    at: Instant


@dataclass
class ChannelConfig:
    kind: str  # ntfy | slack-webhook | discord-webhook | stdout
    url: str = ""
    min_severity: str = "info"
    name: str = ""


@dataclass
class ChannelResult:
    channel: str
    delivered: bool
    attempts: int
    error: str = ""


@dataclass
class DeliveryReport:
    notification: Notification
    suppressed: bool = False
    results: list = field(default_factory=list)


def http_transport(session=None):
    """Default transport: POST the notification to the channel endpoint."""
    import requests

    http = session or requests

    def send(channel: ChannelConfig, n: Notification) -> None:
        if channel.kind == "ntfy":
            resp = http.post(channel.url, data=n.body.encode(), headers={"Title": n.title}, timeout=5)
        else:  # slack-webhook / discord-webhook take a JSON text payload
            key = "text" if channel.kind == "slack-webhook" else "content"
            resp = http.post(channel.url, json={key: f"[{n.severity}] {n.title}\n{n.body}"}, timeout=5)
        resp.raise_for_status()

    return send


class Notifier:
    def __init__(
        self,
        channels: list[ChannelConfig],
        clock: Clock,
        transport: Optional[Callable[[ChannelConfig, Notification], None]] = None,
        sleep: Callable[[float], None] = time.sleep,
        dedupe_window: float = DEDUPE_WINDOW_SECS,
    ):
        # stdout is the always-available default channel
        self.channels = channels or [ChannelConfig(kind="stdout")]
        for i, ch in enumerate(self.channels):
            if not ch.name:
                ch.name = f"{ch.kind}#{i}"
        self.clock = clock
        self.transport = transport or http_transport()
        self.sleep = sleep
        self.dedupe_window = dedupe_window
        self._last_sent: dict[str, Instant] = {}
        self.log: list[DeliveryReport] = []

    def notify(self, n: Notification) -> DeliveryReport:
        report = DeliveryReport(notification=n)
        now = self.clock.now()
        last = self._last_sent.get(n.dedupe_key)
        if last is not None and now - last < self.dedupe_window:
            report.suppressed = True
            self.log.append(report)
            return report
        self._last_sent[n.dedupe_key] = now
        for channel in self.channels:
            if _sev_rank(n.severity) < _sev_rank(channel.min_severity):
                continue
            report.results.append(self._deliver(channel, n))
        self.log.append(report)
        return report

    def _deliver(self, channel: ChannelConfig, n: Notification) -> ChannelResult:
        if channel.kind in ("stdout", "memory"):
            if channel.kind == "stdout":
                print(f"[{n.severity}] {n.title}: {n.body}")
            return ChannelResult(channel=channel.name, delivered=True, attempts=1)
        backoff = FIRST_BACKOFF_SECS
        error = ""
        for attempt in range(1, MAX_ATTEMPTS + 1):
            try:
                self.transport(channel, n)
                return ChannelResult(channel=channel.name, delivered=True, attempts=attempt)
            except Exception as exc:
                error = str(exc)
                if attempt < MAX_ATTEMPTS:
                    self.sleep(backoff)
                    backoff *= 2
        return ChannelResult(channel=channel.name, delivered=False, attempts=MAX_ATTEMPTS, error=error)

    # -- event bus mapping ---------------------------------------------

    def subscribe(self, bus: EventBus) -> None:
        bus.subscribe(self._on_event)

    def _on_event(self, event: FleetEvent) -> None:
        n = self._map_event(event)
        if n is not None:
            self.notify(n)

    def _map_event(self, event: FleetEvent) -> Optional[Notification]:
        if event.kind == eb.STALL:
            return self._make(
                "warn", f"agent stalled: {event.agent}", event, f"stall:{event.agent}"
            )
        if event.kind == eb.RECOVERY:
            return self._make(
                "info", f"agent recovered: {event.agent}", event, f"recovery:{event.agent}"
            )
        if event.kind == eb.RESPAWN_CAP:
            return self._make(
                "page",
                f"manual intervention needed: {event.agent}",
                event,
                f"respawn_cap:{event.agent}",
            )
        if event.kind == eb.ITEM_SKIPPED:
            return self._make(
                "page",
                f"work item skipped after repeated failures: {event.item_id}",
                event,
                f"item_skipped:{event.item_id}",
            )
        if event.kind == eb.ESCALATION:
            return self._make(
                "page", f"escalation: {event.item_id}", event, f"escalation:{event.item_id}"
            )
        return None

    def _make(self, severity: str, title: str, event: FleetEvent, dedupe_key: str) -> Notification:
        return Notification(
            severity=severity,
            title=title,
            body=json.dumps(event.payload, sort_keys=True),
            source=f"{event.kind}:{event.agent or event.item_id or ''}",
            dedupe_key=dedupe_key,
            at=event.at,
        )


def load_channels(path: str | Path) -> list[ChannelConfig]:
    """Parse notify.conf: CHANNEL_<N>_KIND / _URL / _MIN_SEVERITY lines."""
    by_index: dict[str, dict[str, str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        parts = key.strip().upper().split("_", 2)
        if len(parts) != 3 or parts[0] != "CHANNEL":
            continue
        _, index, attr = parts
        by_index.setdefault(index, {})[attr] = value.strip()
    channels = []
    for index in sorted(by_index):
        d = by_index[index]
        channels.append(
            ChannelConfig(
                kind=d.get("KIND", "stdout"),
                url=d.get("URL", ""),
                min_severity=d.get("MIN", d.get("MIN_SEVERITY", "info")).lower(),
                name=f"{d.get('KIND', 'stdout')}#{index}",
            )
        )
    return channels
