"""Wiring: assembles ledger, governor, fleet, notifier and dashboard on one
clock and runs the periodic loops. Used by the supervisor command (real
clock) and the simulation harness (virtual clock)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .bus import EventBus, EventLog
from .clockwork import Clock
from .fleet import (
    Fleet,
    HEALTHCHECK_PERIOD_SECS,
    POLL_PERIOD_SECS,
    RENEW_PERIOD_SECS,
)
from .gateway import CoverageConfig, Dashboard
from .governor import Governor, GovernorConfig, LedgerBacklog
from .ledger import Ledger
from .notifier import ChannelConfig, Notifier
from .simbackend import SimBackend, SimScript


@dataclass
class AgentSpec:
    name: str
    role: str
    backend: str = "sim"
    policy: Optional[str] = None
    self_scheduled: bool = False


class KernelStartupError(Exception):
    def __init__(self, component: str, message: str):
        super().__init__(f"[{component}] {message}")
        self.component = component


@dataclass
class KernelConfig:
    base_dir: Path
    agents: list[AgentSpec] = field(default_factory=list)
    run_dir: Optional[Path] = None
    ledger_dir: Optional[Path] = None
    policies_dir: Optional[Path] = None
    governor_conf: Optional[Path] = None
    channels: list[ChannelConfig] = field(default_factory=list)
    coverage_file: Optional[Path] = None
    coverage_target: float = 90.0
    sim_script: SimScript = field(default_factory=SimScript)
    sim_scripts_by_agent: dict = field(default_factory=dict)
    notifier_transport: object = None
    notifier_sleep: object = None


class Kernel:
    def __init__(self, clock: Clock, config: KernelConfig):
        self.clock = clock
        self.config = config
        base = Path(config.base_dir)
        self.run_dir = Path(config.run_dir) if config.run_dir else base / "run"
        self.ledger_dir = Path(config.ledger_dir) if config.ledger_dir else base / "ledger"
        self.policies_dir = Path(config.policies_dir) if config.policies_dir else base / "policies"
        for d in (self.run_dir, self.ledger_dir, self.policies_dir):
            d.mkdir(parents=True, exist_ok=True)

        self.bus = EventBus()
        self.event_log = EventLog(self.bus)
        self.ledger = Ledger(self.ledger_dir, clock, bus=self.bus)
        self.governor = Governor(
            clock,
            LedgerBacklog(self.ledger),
            config_path=config.governor_conf,
            bus=self.bus,
        )
        self.fleet = Fleet(clock, self.bus, self.run_dir)
        self.dashboard = Dashboard(
            clock,
            self.fleet,
            self.governor,
            self.ledger,
            self.bus,
            coverage=CoverageConfig(path=config.coverage_file, target_pct=config.coverage_target),
        )
        self.fleet.metrics_sink = self.dashboard.record_metrics
        notifier_kwargs = {}
        if config.notifier_transport is not None:
            notifier_kwargs["transport"] = config.notifier_transport
        if config.notifier_sleep is not None:
            notifier_kwargs["sleep"] = config.notifier_sleep
        self.notifier = Notifier(config.channels, clock, **notifier_kwargs)
        self.notifier.subscribe(self.bus)

        sim = SimBackend(
            clock,
            self.ledger,
            self.run_dir,
            script=config.sim_script,
            bus=self.bus,
            scripts_by_agent=config.sim_scripts_by_agent,
        )
        # commercial CLI names are accepted as opaque identifiers; only the
        # simulated backend ships, so they all resolve to it
        for backend_id in ("sim", "sim2", "claude", "gemini", "copilot", "goose"):
            self.fleet.register_backend(backend_id, sim)

        for spec in config.agents:
            policy = spec.policy or str(self.policies_dir / f"{spec.name}.md")
            if spec.policy is not None and not Path(policy).exists():
                raise KernelStartupError("fleet", f"policy file not found: {policy}")
            if not Path(policy).exists():
                Path(policy).write_text(f"# policy for {spec.name}\n", encoding="utf-8")
            self.fleet.add_agent(
                spec.name, spec.role, spec.backend, policy, self_scheduled=spec.self_scheduled
            )

        self._timers: list = []

    def register_sim_backend(self, backend_id: str, script: SimScript) -> None:
        self.fleet.register_backend(
            backend_id,
            SimBackend(self.clock, self.ledger, self.run_dir, script=script, bus=self.bus),
        )

    def start(self) -> None:
        for name in self.fleet.agents:
            self.fleet.spawn(name)
        tick_secs = self.governor.state.config.tick_secs

        def governed_tick() -> None:
            for order in self.governor.tick():
                self.fleet.dispatch(order)

        self._timers.append(self.clock.every(tick_secs, governed_tick))
        self._timers.append(self.clock.every(POLL_PERIOD_SECS, self.fleet.supervisor_poll))
        self._timers.append(self.clock.every(HEALTHCHECK_PERIOD_SECS, self.fleet.healthcheck))
        self._timers.append(self.clock.every(RENEW_PERIOD_SECS, self.fleet.renew))
        self.dashboard.start_publishing()

    def shutdown(self) -> None:
        for t in self._timers:
            t.cancel()
        self._timers.clear()
        self.dashboard.stop_publishing()
        self.fleet.terminate_all()
        self.ledger.write_snapshot()
