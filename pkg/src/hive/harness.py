"""Scenario-driven simulation on the virtual clock.

Synthetic backlog arrivals plus scripted simulated agents exercise the whole
kernel end to end; the run produces a report with the governor mode trace,
per-item fix times, kick counts, the notification log, and the final ledger
state. Identical seeds produce byte-identical reports.
"""

from __future__ import annotations

import json
import math
import random
import statistics
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import bus as eb
from .kernel import AgentSpec, Kernel, KernelConfig
from .ledger import LedgerEvent, replayed_json
from .notifier import ChannelConfig
from .simbackend import SimScript

DEFAULT_HORIZON_SECS = 4 * 3600.0


class ScenarioError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class Scenario:
    seed: int = 0
    horizon_secs: float = DEFAULT_HORIZON_SECS
    arrivals: list = field(default_factory=list)
    agents: dict = field(default_factory=lambda: {"scanner": 1, "reviewer": 1})
    service_time_secs: float = 600.0
    success_probability: object = 1.0
    items_per_kick: int = 1
    heartbeat_every_secs: float = 60.0
    tokens_per_kick: int = 1000
    governor: dict = field(default_factory=dict)  # env-style overrides
    faults: dict = field(default_factory=dict)  # agent name -> script overrides

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ScenarioError([f"unknown field {k!r}" for k in sorted(unknown)])
        scenario = cls(**doc)
        scenario.validate()
        return scenario

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"scenario does not parse: {exc}"]) from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        problems = []
        if self.horizon_secs <= 0:
            problems.append("horizon_secs must be positive")
        if self.service_time_secs < 0:
            problems.append("service_time_secs must be non-negative")
        if self.items_per_kick < 1:
            problems.append("items_per_kick must be >= 1")
        for role in self.agents:
            if role not in ("scanner", "reviewer", "architect", "outreach"):
                problems.append(f"unknown agent role {role!r}")
        for i, arrival in enumerate(self.arrivals):
            if not isinstance(arrival, dict):
                problems.append(f"arrivals[{i}] must be an object")
                continue
            if "at" not in arrival and "poisson_rate_per_hour" not in arrival:
                problems.append(f"arrivals[{i}] needs 'at' or 'poisson_rate_per_hour'")
            if arrival.get("kind", "issue") not in ("issue", "pr", "task"):
                problems.append(f"arrivals[{i}] has unknown kind {arrival.get('kind')!r}")
        if problems:
            raise ScenarioError(problems)


def expand_arrivals(scenario: Scenario) -> list[tuple[float, str, str, str]]:
    """(at, repo, kind, title) tuples, sorted; Poisson streams are sampled by
    seeded inversion of the exponential interarrival distribution."""
    rng = random.Random(f"arrivals:{scenario.seed}")
    out: list[tuple[float, str, str, str]] = []
    for i, arrival in enumerate(scenario.arrivals):
        repo = arrival.get("repo", "repo")
        kind = arrival.get("kind", "issue")
        if "at" in arrival:
            count = int(arrival.get("count", 1))
            for j in range(count):
                title = arrival.get("title", f"work {i}.{j}")
                out.append((float(arrival["at"]), repo, kind, title))
        else:
            rate = float(arrival["poisson_rate_per_hour"]) / 3600.0
            t = 0.0
            j = 0
            while rate > 0:
                t += -math.log(1.0 - rng.random()) / rate
                if t > scenario.horizon_secs:
                    break
                out.append((t, repo, kind, f"poisson {i}.{j}"))
                j += 1
    out.sort(key=lambda a: (a[0], a[3]))
    return out


def _percentile(values: list[float], q: float) -> Optional[float]:
    if not values:
        return None
    ordered = sorted(values)
    idx = min(len(ordered) - 1, int(math.ceil(q * len(ordered))) - 1)
    return ordered[max(idx, 0)]


def run(scenario: Scenario, workdir: Optional[str | Path] = None) -> dict:
    """Execute the scenario and assemble the SimReport."""
    from .clockwork import VirtualClock

    scenario.validate()
    if workdir is None:
        with tempfile.TemporaryDirectory() as tmp:
            return run(scenario, tmp)
    base = Path(workdir)
    base.mkdir(parents=True, exist_ok=True)

    clock = VirtualClock()
    governor_conf = base / "governor.conf"
    lines = [f"{k}={v}" for k, v in scenario.governor.items()]
    governor_conf.write_text("\n".join(lines) + "\n", encoding="utf-8")

    script = SimScript(
        items_per_kick=scenario.items_per_kick,
        service_time=scenario.service_time_secs,
        success_probability=scenario.success_probability,
        heartbeat_every=scenario.heartbeat_every_secs,
        tokens_per_kick=scenario.tokens_per_kick,
        seed=scenario.seed,
    )
    agents = []
    scripts_by_agent = {}
    for role, count in scenario.agents.items():
        for i in range(1, int(count) + 1):
            name = f"{role}-{i}"
            agents.append(AgentSpec(name=name, role=role, backend="sim"))
            if name in scenario.faults:
                overrides = dict(scenario.faults[name])
                scripts_by_agent[name] = SimScript(
                    **{**script.__dict__, **overrides}
                )

    kernel = Kernel(
        clock,
        KernelConfig(
            base_dir=base,
            agents=agents,
            governor_conf=governor_conf,
            channels=[ChannelConfig(kind="memory")],
            sim_script=script,
            sim_scripts_by_agent=scripts_by_agent,
        ),
    )

    mode_trace: list[tuple[float, str]] = []
    kernel.start()
    tick_secs = kernel.governor.state.config.tick_secs
    # registered after the kernel's tick timer, so at equal deadlines this
    # samples the state the tick just produced
    clock.every(tick_secs, lambda: mode_trace.append((clock.now(), kernel.governor.state.mode.value)))

    for at, repo, kind, title in expand_arrivals(scenario):
        clock.schedule(at, lambda r=repo, k=kind, t=title: kernel.ledger.add_item(r, k, t, "source"))

    clock.advance(scenario.horizon_secs)
    kernel.shutdown()

    # -- assemble the report -------------------------------------------
    ledger_events = kernel.ledger.read_events()
    created: dict[str, float] = {}
    done: dict[str, float] = {}
    for ev in ledger_events:
        if ev.transition == "create":
            created[ev.item_id] = ev.at
        elif ev.transition == "in_progress->done":
            done[ev.item_id] = ev.at
    fix_times = sorted(done[i] - created[i] for i in done)

    kick_counts: dict[str, int] = {}
    for event in kernel.event_log.of_kind(eb.KICK):
        role = kernel.fleet.agents[event.agent].role
        kick_counts[role] = kick_counts.get(role, 0) + 1

    status_counts: dict[str, int] = {}
    for item in kernel.ledger.list():
        status_counts[item.status] = status_counts.get(item.status, 0) + 1

    notifications = [
        {
            "at": r.notification.at,
            "severity": r.notification.severity,
            "title": r.notification.title,
            "suppressed": r.suppressed,
        }
        for r in kernel.notifier.log
    ]

    report = {
        "scenario_seed": scenario.seed,
        "horizon_secs": scenario.horizon_secs,
        "mode_trace": mode_trace,
        "kick_counts": kick_counts,
        "arrived": len(created),
        "status_counts": status_counts,
        "fix_times": {
            "count": len(fix_times),
            "median_secs": statistics.median(fix_times) if fix_times else None,
            "p90_secs": _percentile(fix_times, 0.90),
            "per_item": [
                {"item_id": i, "created_at": created[i], "done_at": done[i]}
                for i in sorted(done)
            ],
        },
        "notifications": notifications,
        "pages": sum(
            1 for n in notifications if n["severity"] == "page" and not n["suppressed"]
        ),
        "final_ledger": kernel.ledger.materialized_json(),
    }
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


def conservation_holds(report: dict) -> bool:
    return report["arrived"] == sum(report["status_counts"].values())


def replay(report: dict, ledger_events: list[LedgerEvent]) -> bool:
    """True iff replaying the event log reproduces the report's final ledger."""
    return replayed_json(ledger_events) == report["final_ledger"]


def write_csvs(report: dict, out_dir: str | Path) -> list[Path]:
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    trace_path = out / "mode_trace.csv"
    with open(trace_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["at_secs", "mode"])
        w.writerows(report["mode_trace"])
    paths.append(trace_path)

    timings_path = out / "item_timings.csv"
    with open(timings_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["item_id", "created_at", "done_at", "fix_secs"])
        for row in report["fix_times"]["per_item"]:
            w.writerow(
                [row["item_id"], row["created_at"], row["done_at"], row["done_at"] - row["created_at"]]
            )
    paths.append(timings_path)
    return paths
