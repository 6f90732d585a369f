"""Scriptable simulated agent backend.

The reference backend for tests and scenarios: on each kick it claims up to
K open ledger items, holds each for a service time, then completes or fails
it with a configured success probability. It heartbeats on a timer and can
be scripted to misbehave (hang at start, crash at start, crash at a time,
stop heartbeating at a time) to exercise the supervision paths.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock
from .fleet import READY_SENTINEL
from .ledger import AlreadyClaimed, InvalidState, Ledger


@dataclass
class SimScript:
    items_per_kick: int = 1
    service_time: float = 600.0
    # float, or map of item kind -> probability ("default" for the rest)
    success_probability: Union[float, dict] = 1.0
    heartbeat_every: float = 60.0
    tokens_per_kick: int = 1000
    hang_at_start: bool = False
    crash_at_start: bool = False
    stop_heartbeat_at: Optional[float] = None  # absolute clock time
    crash_at: Optional[float] = None  # absolute clock time
    seed: int = 0

    def probability_for(self, kind: str) -> float:
        if isinstance(self.success_probability, dict):
            if kind in self.success_probability:
                return float(self.success_probability[kind])
            return float(self.success_probability.get("default", 1.0))
        return float(self.success_probability)


class SimSession:
    def __init__(
        self,
        agent_name: str,
        policy_path: str,
        clock: Clock,
        ledger: Ledger,
        script: SimScript,
        run_dir: Path,
        bus: Optional[EventBus] = None,
    ):
        self.agent_name = agent_name
        self.policy_path = policy_path
        self.clock = clock
        self.ledger = ledger
        self.script = script
        self.run_dir = run_dir
        self.bus = bus
        self._alive = True
        self._heartbeating = True
        self._output: list[str] = []
        self._timers: list = []
        self._rng = random.Random(f"{script.seed}:{agent_name}")

        if script.crash_at_start:
            self._alive = False
            return
        self._touch_heartbeat()
        self._timers.append(clock.every(script.heartbeat_every, self._touch_heartbeat))
        if script.stop_heartbeat_at is not None:
            self._timers.append(
                clock.schedule(script.stop_heartbeat_at, self._stop_heartbeating)
            )
        if script.crash_at is not None:
            self._timers.append(clock.schedule(script.crash_at, self._crash))
        if not script.hang_at_start:
            self._output.append(READY_SENTINEL)

    # -- session contract ----------------------------------------------

    def alive(self) -> bool:
        return self._alive

    def drain_output(self) -> list[str]:
        out, self._output = self._output, []
        return out

    def terminate(self) -> None:
        self._alive = False
        for t in self._timers:
            t.cancel()
        self._timers.clear()

    def deliver(self, text: str) -> None:
        if not self._alive:
            return
        parts = text.split()
        kick_id = parts[1] if len(parts) > 1 else "?"
        claimed = []
        for item in self.ledger.list(status="open"):
            if len(claimed) >= self.script.items_per_kick:
                break
            try:
                claimed.append(self.ledger.claim(item.id, self.agent_name))
            except (AlreadyClaimed, InvalidState):
                continue  # another actor got there first
        if not claimed:
            self._output.append(f"@@DONE {kick_id} ok@@")
            self._report_tokens()
            return
        state = {"remaining": list(claimed), "all_ok": True}

        def work_next() -> None:
            if not self._alive:
                return
            item = state["remaining"].pop(0)
            p = self.script.probability_for(item.kind)
            if self._rng.random() < p:
                self.ledger.complete(item.id, self.agent_name, notes=f"fixed by {self.agent_name}")
            else:
                self.ledger.fail_attempt(item.id, self.agent_name)
                state["all_ok"] = False
            if state["remaining"]:
                self._timers.append(self.clock.schedule_in(self.script.service_time, work_next))
            else:
                outcome = "ok" if state["all_ok"] else "fail"
                self._output.append(f"@@DONE {kick_id} {outcome}@@")
                self._report_tokens()

        self._timers.append(self.clock.schedule_in(self.script.service_time, work_next))

    # -- internals ------------------------------------------------------

    def _touch_heartbeat(self) -> None:
        if not (self._alive and self._heartbeating):
            return
        path = self.run_dir / f"heartbeat.{self.agent_name}"
        path.write_text(str(self.clock.now()), encoding="utf-8")

    def _stop_heartbeating(self) -> None:
        self._heartbeating = False

    def _crash(self) -> None:
        self.terminate()

    def _report_tokens(self) -> None:
        if self.bus is not None and self.script.tokens_per_kick:
            self.bus.publish(
                FleetEvent(
                    at=self.clock.now(),
                    kind=eb.METRICS,
                    agent=self.agent_name,
                    payload={"tokens": self.script.tokens_per_kick},
                )
            )


class SimBackend:
    """Backend factory producing SimSessions wired to the shared ledger."""

    def __init__(
        self,
        clock: Clock,
        ledger: Ledger,
        run_dir: str | Path,
        script: Optional[SimScript] = None,
        bus: Optional[EventBus] = None,
        scripts_by_agent: Optional[dict[str, SimScript]] = None,
    ):
        self.clock = clock
        self.ledger = ledger
        self.run_dir = Path(run_dir)
        self.script = script or SimScript()
        self.bus = bus
        self.scripts_by_agent = scripts_by_agent or {}

    def __call__(self, agent_name: str, policy_path: str) -> SimSession:
        script = self.scripts_by_agent.get(agent_name, self.script)
        return SimSession(
            agent_name, policy_path, self.clock, self.ledger, script, self.run_dir, self.bus
        )
