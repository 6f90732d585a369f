"""Multi-agent orchestration kernel.

Keeps a fleet of pluggable agent sessions alive, schedules their work via an
adaptive workload governor, coordinates them through an actor-claimed work
ledger with backoff and audit trail, self-tunes per-category work weights
from acceptance outcomes, escalates to humans via push notifications, and
exposes a real-time status gateway.
"""

__version__ = "0.1.0"
