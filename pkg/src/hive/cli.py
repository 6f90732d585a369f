"""Operator command surface.

Subcommands: supervisor (run the kernel + gateway), dashboard (gateway and
static UI only, fleet disabled), status / kick / switch (thin HTTP clients
against a running supervisor), and sim (run a scenario file and write the
report). No business logic lives here; every effect is a gateway call or a
harness invocation.

Exit codes: 0 success, 1 validation, 2 connectivity, 3 internal.
"""

from __future__ import annotations

import json
import os
import signal
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONNECTIVITY = 2
EXIT_INTERNAL = 3

DEFAULT_PORT = 3001


def _parse_env_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        out[key.strip().upper()] = value.strip()
    return out


@dataclass
class CliConfig:
    base_dir: Path
    agents_conf: Optional[Path] = None
    governor_conf: Optional[Path] = None
    notify_conf: Optional[Path] = None
    policies_dir: Optional[Path] = None
    run_dir: Optional[Path] = None
    ledger_dir: Optional[Path] = None
    port: int = DEFAULT_PORT

    @classmethod
    def load(cls, config_path: Optional[str], port: Optional[int]) -> "CliConfig":
        """Resolve from a hive.conf file, with HIVE_* env overrides."""
        base = Path(config_path).resolve().parent if config_path else Path.cwd()
        raw: dict[str, str] = {}
        if config_path:
            p = Path(config_path)
            if not p.exists():
                raise click.ClickException(f"config file not found: {config_path}")
            raw = _parse_env_file(p)
        for key in ("AGENTS_CONF", "GOVERNOR_CONF", "NOTIFY_CONF", "POLICIES_DIR",
                    "RUN_DIR", "LEDGER_DIR", "DASHBOARD_PORT"):
            env = os.environ.get(f"HIVE_{key}")
            if env is not None:
                raw[key] = env

        def path_of(key: str) -> Optional[Path]:
            if key not in raw:
                return None
            p = Path(raw[key])
            return p if p.is_absolute() else base / p

        cfg = cls(
            base_dir=base,
            agents_conf=path_of("AGENTS_CONF"),
            governor_conf=path_of("GOVERNOR_CONF"),
            notify_conf=path_of("NOTIFY_CONF"),
            policies_dir=path_of("POLICIES_DIR"),
            run_dir=path_of("RUN_DIR"),
            ledger_dir=path_of("LEDGER_DIR"),
            port=int(raw.get("DASHBOARD_PORT", DEFAULT_PORT)),
        )
        if port is not None:
            cfg.port = port
        for name in ("agents_conf", "governor_conf", "notify_conf"):
            p = getattr(cfg, name)
            if p is not None and not p.exists():
                raise click.ClickException(f"{name} not found: {p}")
        return cfg


def parse_agents_conf(path: Path) -> list:
    """agents.conf: `<NAME>_ROLE=`, `<NAME>_BACKEND=`, `<NAME>_POLICY=`,
    optional `<NAME>_SELF_SCHEDULED=true`."""
    from .kernel import AgentSpec

    raw = _parse_env_file(path)
    by_agent: dict[str, dict[str, str]] = {}
    for key, value in raw.items():
        name, _, attr = key.rpartition("_")
        if attr == "SCHEDULED" and name.endswith("_SELF"):
            name, attr = name[: -len("_SELF")], "SELF_SCHEDULED"
        if attr not in ("ROLE", "BACKEND", "POLICY", "SELF_SCHEDULED"):
            continue
        by_agent.setdefault(name.lower(), {})[attr] = value
    specs = []
    for name in sorted(by_agent):
        d = by_agent[name]
        if "ROLE" not in d:
            raise click.ClickException(f"agent {name!r} is missing ROLE")
        specs.append(
            AgentSpec(
                name=name,
                role=d["ROLE"].lower(),
                backend=d.get("BACKEND", "sim"),
                policy=d.get("POLICY"),
                self_scheduled=d.get("SELF_SCHEDULED", "").lower() == "true",
            )
        )
    return specs


def _build_kernel(cfg: CliConfig, with_fleet: bool):
    from .clockwork import RealClock
    from .kernel import Kernel, KernelConfig
    from .notifier import load_channels
    from .simbackend import SimScript

    agents = parse_agents_conf(cfg.agents_conf) if (with_fleet and cfg.agents_conf) else []
    channels = load_channels(cfg.notify_conf) if cfg.notify_conf else []
    clock = RealClock()
    kernel = Kernel(
        clock,
        KernelConfig(
            base_dir=cfg.base_dir,
            agents=agents,
            governor_conf=cfg.governor_conf,
            channels=channels,
            run_dir=cfg.run_dir,
            ledger_dir=cfg.ledger_dir,
            policies_dir=cfg.policies_dir,
            sim_script=SimScript(service_time=5.0, heartbeat_every=5.0),
        ),
    )
    return clock, kernel


def _serve(cfg: CliConfig, with_fleet: bool, static_dir: Optional[Path]) -> int:
    import uvicorn

    from .gateway import create_app
    from .kernel import KernelStartupError

    try:
        clock, kernel = _build_kernel(cfg, with_fleet)
    except KernelStartupError as exc:
        click.echo(str(exc), err=True)
        return EXIT_VALIDATION

    app = create_app(kernel.dashboard, static_dir=static_dir)
    kernel.start()

    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=cfg.port, log_level="warning"))

    def handle_term(signum, frame):
        server.should_exit = True

    signal.signal(signal.SIGTERM, handle_term)
    signal.signal(signal.SIGINT, handle_term)
    try:
        server.run()
    finally:
        kernel.shutdown()
        clock.stop()
    return EXIT_OK


def _gateway_url(port: int) -> str:
    return f"http://127.0.0.1:{port}"


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="Path to hive.conf")
@click.option("--port", type=int, default=None, help="Dashboard port (default 3001)")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str], port: Optional[int]) -> None:
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["port"] = port


def _load_cfg(ctx: click.Context) -> CliConfig:
    try:
        return CliConfig.load(ctx.obj.get("config_path"), ctx.obj.get("port"))
    except click.ClickException as exc:
        click.echo(exc.message, err=True)
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.pass_context
def supervisor(ctx: click.Context) -> None:
    """Start the full kernel: fleet, governor, notifier, gateway."""
    cfg = _load_cfg(ctx)
    sys.exit(_serve(cfg, with_fleet=True, static_dir=_ui_dir()))


@main.command()
@click.pass_context
def dashboard(ctx: click.Context) -> None:
    """Gateway plus static UI only; the fleet is disabled."""
    cfg = _load_cfg(ctx)
    sys.exit(_serve(cfg, with_fleet=False, static_dir=_ui_dir()))


def _ui_dir() -> Optional[Path]:
    for candidate in (
        Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ):
        if candidate.exists():
            return candidate
    return None


@main.command()
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@click.pass_context
def status(ctx: click.Context, fmt: str) -> None:
    """Print governor mode, queue size, and the per-agent state table."""
    import requests

    cfg = _load_cfg(ctx)
    try:
        resp = requests.get(f"{_gateway_url(cfg.port)}/api/status", timeout=5)
        resp.raise_for_status()
    except requests.RequestException as exc:
        click.echo(f"supervisor unreachable: {exc}", err=True)
        sys.exit(EXIT_CONNECTIVITY)
    snap = resp.json()
    if fmt == "raw":
        click.echo(json.dumps(snap, indent=1))
        sys.exit(EXIT_OK)
    gov = snap["governor"]
    click.echo(f"mode={gov['mode']} queue={gov['queue_size']} intensity={snap['intensity']:.2f}")
    click.echo(f"{'agent':<14}{'role':<11}{'backend':<9}{'state':<11}{'respawns':<9}pinned")
    for a in snap["agents"]:
        click.echo(
            f"{a['name']:<14}{a['role']:<11}{a['backend_id']:<9}"
            f"{a['session_state']:<11}{a['respawn_count']:<9}{a['pinned']}"
        )
    sys.exit(EXIT_OK)


@main.command()
@click.argument("agent")
@click.pass_context
def kick(ctx: click.Context, agent: str) -> None:
    """One immediate kick for AGENT via the gateway."""
    import requests

    cfg = _load_cfg(ctx)
    try:
        resp = requests.post(f"{_gateway_url(cfg.port)}/api/agents/{agent}/kick", timeout=5)
    except requests.RequestException as exc:
        click.echo(f"supervisor unreachable: {exc}", err=True)
        sys.exit(EXIT_CONNECTIVITY)
    body = resp.json()
    if resp.status_code == 404:
        click.echo(body.get("error", "unknown agent"), err=True)
        sys.exit(EXIT_VALIDATION)
    if body.get("status") == "delivered":
        click.echo(f"delivered: {body['detail']}")
    else:
        click.echo(f"{body.get('status')}: {body.get('detail')}")
    sys.exit(EXIT_OK if resp.ok else EXIT_INTERNAL)


@main.command()
@click.argument("agent")
@click.argument("backend")
@click.pass_context
def switch(ctx: click.Context, agent: str, backend: str) -> None:
    """Switch AGENT to BACKEND (pins the choice)."""
    import requests

    cfg = _load_cfg(ctx)
    try:
        resp = requests.post(
            f"{_gateway_url(cfg.port)}/api/agents/{agent}/backend",
            json={"backend_id": backend},
            timeout=5,
        )
    except requests.RequestException as exc:
        click.echo(f"supervisor unreachable: {exc}", err=True)
        sys.exit(EXIT_CONNECTIVITY)
    body = resp.json()
    if not resp.ok:
        click.echo(body.get("error", "switch failed"), err=True)
        sys.exit(EXIT_VALIDATION)
    suffix = " (deferred until idle)" if body.get("deferred") else ""
    click.echo(f"pinned to {body['backend_id']}{suffix}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=str, default="sim-out", help="Report output directory")
@click.pass_context
def sim(ctx: click.Context, scenario_path: str, out_dir: str) -> None:
    """Run a scenario file; write report.json and CSVs; exit 0 iff the
    scenario invariants (conservation, replay equivalence) held."""
    from . import harness
    from .ledger import Ledger
    from .clockwork import VirtualClock
    import tempfile

    try:
        scenario = harness.Scenario.from_file(scenario_path)
    except harness.ScenarioError as exc:
        for problem in exc.problems:
            click.echo(f"scenario error: {problem}", err=True)
        sys.exit(EXIT_VALIDATION)

    with tempfile.TemporaryDirectory() as tmp:
        report = harness.run(scenario, tmp)
        events = Ledger(Path(tmp) / "ledger", VirtualClock()).read_events()
        replay_ok = harness.replay(report, events)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(harness.report_json(report), encoding="utf-8")
    harness.write_csvs(report, out)
    conserved = harness.conservation_holds(report)
    click.echo(
        f"report written to {out}/report.json "
        f"(conservation={'ok' if conserved else 'VIOLATED'}, replay={'ok' if replay_ok else 'MISMATCH'})"
    )
    sys.exit(EXIT_OK if (conserved and replay_ok) else EXIT_INTERNAL)


if __name__ == "__main__":
    main()
