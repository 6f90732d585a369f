"""Adaptive workload governor.

Every tick (5 minutes by default) the governor re-reads its env-style config
file, measures the backlog across managed repos, selects a workload mode,
and decides which agent roles are due for a kick. Policy only: kick orders
are values handed to the fleet, never direct session pokes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Union

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock, Duration, Instant


class Mode(Enum):
    SURGE = "SURGE"
    BUSY = "BUSY"
    QUIET = "QUIET"
    IDLE = "IDLE"


ROLES = ("scanner", "reviewer", "architect", "outreach")

PAUSED = "paused"

Cadence = Union[float, str]  # seconds, or PAUSED

# (mode, role) -> cadence in minutes; None marks a paused cell
_DEFAULT_MINUTES: dict[Mode, tuple[Optional[int], ...]] = {
    Mode.SURGE: (10, 10, None, None),
    Mode.BUSY: (15, 15, None, None),
    Mode.QUIET: (15, 30, 60, 120),
    Mode.IDLE: (30, 60, 30, 30),
}

DEFAULT_TICK_SECS = 300.0
DEFAULT_THRESHOLDS = {"surge": 20, "busy": 10, "quiet": 2}


def default_cadence_table() -> dict[tuple[Mode, str], Cadence]:
    table: dict[tuple[Mode, str], Cadence] = {}
    for mode, row in _DEFAULT_MINUTES.items():
        for role, minutes in zip(ROLES, row):
            table[(mode, role)] = PAUSED if minutes is None else float(minutes) * 60
    return table


class ConfigurationError(Exception):
    pass


class SourceUnavailable(Exception):
    pass


class BacklogSource(Protocol):
    def counts(self) -> list[tuple[int, int]]:
        """Per managed repo: (open issues, open PRs). Raises SourceUnavailable."""
        ...


def measure_backlog(source: BacklogSource) -> int:
    total = 0
    for issues, prs in source.counts():
        if issues < 0 or prs < 0:
            raise ConfigurationError("backlog counts must be non-negative")
        total += issues + prs
    return total


def select_mode(queue_size: int, thresholds: Optional[dict] = None) -> Mode:
    """Pure threshold classifier; strict inequalities."""
    t = thresholds or DEFAULT_THRESHOLDS
    if queue_size < 0:
        raise ConfigurationError("queue_size must be non-negative")
    if queue_size > t["surge"]:
        return Mode.SURGE
    if queue_size > t["busy"]:
        return Mode.BUSY
    if queue_size > t["quiet"]:
        return Mode.QUIET
    return Mode.IDLE


@dataclass
class GovernorConfig:
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    cadence_table: dict = field(default_factory=default_cadence_table)
    tick_secs: float = DEFAULT_TICK_SECS

    @classmethod
    def from_file(cls, path: str | Path) -> "GovernorConfig":
        cfg = cls()
        text = Path(path).read_text(encoding="utf-8")
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, value = line.partition("=")
            key = key.strip().upper()
            value = value.strip()
            try:
                if key == "SURGE_THRESHOLD":
                    cfg.thresholds["surge"] = int(value)
                elif key == "BUSY_THRESHOLD":
                    cfg.thresholds["busy"] = int(value)
                elif key == "QUIET_THRESHOLD":
                    cfg.thresholds["quiet"] = int(value)
                elif key == "GOVERNOR_TICK_SECS":
                    cfg.tick_secs = float(value)
                elif key.startswith("CADENCE_"):
                    _, mode_name, role = key.split("_", 2)
                    mode = Mode[mode_name]
                    role = role.lower()
                    if role not in ROLES:
                        raise ConfigurationError(f"unknown role {role!r}")
                    cfg.cadence_table[(mode, role)] = (
                        PAUSED if value.lower() == PAUSED else float(value)
                    )
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"bad config line {raw!r}: {exc}") from exc
        return cfg


def cadence_for(config: GovernorConfig, mode: Mode, role: str) -> Cadence:
    if role not in ROLES:
        raise ConfigurationError(f"unknown role {role!r}")
    return config.cadence_table[(mode, role)]


@dataclass(frozen=True)
class KickOrder:
    kick_id: str
    role: str
    mode: Mode
    queue_snapshot: int
    issued_at: Instant
    source: str = "governor"
    agent_name: Optional[str] = None  # None = every agent of the role


@dataclass
class GovernorState:
    mode: Mode = Mode.IDLE
    queue_size: int = 0
    last_tick: Optional[Instant] = None
    last_kick: dict = field(default_factory=dict)  # role -> Instant
    config: GovernorConfig = field(default_factory=GovernorConfig)


class Governor:
    """Policy loop. tick() is called by the scheduler; never re-entered."""

    def __init__(
        self,
        clock: Clock,
        source: BacklogSource,
        config_path: Optional[str | Path] = None,
        bus: Optional[EventBus] = None,
    ):
        self.clock = clock
        self.source = source
        self.config_path = Path(config_path) if config_path else None
        self.bus = bus
        self.state = GovernorState()
        if self.config_path and self.config_path.exists():
            self.state.config = GovernorConfig.from_file(self.config_path)
        self._kick_seq = itertools.count(1)

    def tick(self) -> list[KickOrder]:
        now = self.clock.now()
        state = self.state
        state.last_tick = now

        # 1. hot-reload config; on error keep the previous table
        if self.config_path is not None:
            try:
                state.config = GovernorConfig.from_file(self.config_path)
            except (OSError, ConfigurationError) as exc:
                self._publish(eb.CONFIG_ERROR, {"error": str(exc)})

        # 2. measure backlog; on source failure keep previous queue and mode
        try:
            queue = measure_backlog(self.source)
        except SourceUnavailable as exc:
            self._publish(eb.DEGRADED_MEASUREMENT, {"error": str(exc)})
            queue = state.queue_size
            mode = state.mode
        else:
            state.queue_size = queue
            mode = select_mode(queue, state.config.thresholds)

        # 3. mode change event
        if mode is not state.mode:
            self._publish(eb.MODE_CHANGE, {"from": state.mode.value, "to": mode.value, "queue": queue})
            state.mode = mode

        # 4. kick due roles; paused roles keep their last_kick untouched
        orders: list[KickOrder] = []
        for role in ROLES:
            cadence = state.config.cadence_table[(mode, role)]
            if cadence == PAUSED:
                continue
            last = state.last_kick.get(role)
            if last is None or now - last >= cadence:
                order = KickOrder(
                    kick_id=f"k{next(self._kick_seq)}",
                    role=role,
                    mode=mode,
                    queue_snapshot=queue,
                    issued_at=now,
                )
                orders.append(order)
                state.last_kick[role] = now
        return orders

    def _publish(self, kind: str, payload: dict) -> None:
        if self.bus is not None:
            self.bus.publish(FleetEvent(at=self.clock.now(), kind=kind, payload=payload))


class StaticBacklog:
    """Fixed backlog source for tests and forced-mode scenarios."""

    def __init__(self, counts: list[tuple[int, int]]):
        self._counts = counts

    def counts(self) -> list[tuple[int, int]]:
        return list(self._counts)


class LedgerBacklog:
    """Backlog measured from the work ledger: outstanding items per repo."""

    def __init__(self, ledger) -> None:
        self.ledger = ledger

    def counts(self) -> list[tuple[int, int]]:
        outstanding: dict[str, tuple[int, int]] = {}
        for item in self.ledger.list():
            if item.status in ("open", "in_progress"):
                issues, prs = outstanding.get(item.repo, (0, 0))
                if item.kind == "pr":
                    prs += 1
                else:
                    issues += 1
                outstanding[item.repo] = (issues, prs)
        return list(outstanding.values())
