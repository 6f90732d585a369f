"""Embedded, persistent, actor-claimed work ledger.

The event log (`ledger.events`, one JSON record per line, append-only) is the
source of truth; the in-memory item table is a materialized view that can be
rebuilt by replay. A snapshot file (`ledger.snapshot`) speeds up startup but
is never authoritative.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from . import bus as eb
from .bus import EventBus, FleetEvent
from .clockwork import Clock, Instant

MAX_FIX_ATTEMPTS = 3

KINDS = ("issue", "pr", "task")
STATUSES = ("open", "in_progress", "done", "skip", "escalated")

EVENTS_FILE = "ledger.events"
SNAPSHOT_FILE = "ledger.snapshot"


class LedgerError(Exception):
    pass


class NotFound(LedgerError):
    pass


class AlreadyClaimed(LedgerError):
    def __init__(self, owning_actor: str):
        super().__init__(f"already claimed by {owning_actor}")
        self.owning_actor = owning_actor


class InvalidState(LedgerError):
    pass


class NotOwner(LedgerError):
    pass


@dataclass
class WorkItem:
    id: str
    repo: str
    kind: str
    title: str
    status: str
    actor: Optional[str]
    fix_attempts: int
    notes: str
    created_at: Instant
    updated_at: Instant

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "repo": self.repo,
            "kind": self.kind,
            "title": self.title,
            "status": self.status,
            "actor": self.actor,
            "fix_attempts": self.fix_attempts,
            "notes": self.notes,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkItem":
        return cls(**d)


@dataclass(frozen=True)
class LedgerEvent:
    seq: int
    at: Instant
    item_id: str
    actor: str
    transition: str
    payload: str


def _iso(at: Instant) -> str:
    return datetime.fromtimestamp(at, tz=timezone.utc).isoformat()


def _encode_event(ev: LedgerEvent) -> str:
    # fixed field order; `ts` is for human audit, `at` is the replayed value
    return json.dumps(
        {
            "seq": ev.seq,
            "ts": _iso(ev.at),
            "at": ev.at,
            "item_id": ev.item_id,
            "actor": ev.actor,
            "transition": ev.transition,
            "payload": ev.payload,
        },
        separators=(",", ":"),
    )


def _decode_event(line: str) -> LedgerEvent:
    d = json.loads(line)
    return LedgerEvent(
        seq=d["seq"],
        at=d["at"],
        item_id=d["item_id"],
        actor=d["actor"],
        transition=d["transition"],
        payload=d["payload"],
    )


def replay_events(events: Iterable[LedgerEvent]) -> dict[str, WorkItem]:
    """Rebuild the item table from scratch by applying events in order."""
    items: dict[str, WorkItem] = {}
    for ev in events:
        if ev.transition == "create":
            fields = json.loads(ev.payload)
            items[ev.item_id] = WorkItem(
                id=ev.item_id,
                repo=fields["repo"],
                kind=fields["kind"],
                title=fields["title"],
                status="open",
                actor=None,
                fix_attempts=0,
                notes="",
                created_at=ev.at,
                updated_at=ev.at,
            )
            continue
        item = items.get(ev.item_id)
        if item is None:
            continue
        if "->" in ev.transition:
            from_status, _, to_status = ev.transition.partition("->")
            # a transition whose from-status does not match the replayed
            # state marks a corrupted or tampered log; skip it so the
            # divergence is visible in the rebuilt state
            if item.status != from_status:
                continue
            item.updated_at = ev.at
            if to_status == "in_progress":
                item.status = "in_progress"
                item.actor = ev.actor
            elif to_status == "done":
                item.status = "done"
                item.notes = ev.payload
                item.actor = ev.actor
            elif to_status == "open":
                item.status = "open"
                item.actor = None
                item.fix_attempts += 1
            elif to_status == "skip":
                item.status = "skip"
                item.fix_attempts += 1
            elif to_status == "escalated":
                item.status = "escalated"
                if ev.payload:
                    item.notes = (item.notes + "\n" if item.notes else "") + ev.payload
        elif ev.transition == "note":
            item.updated_at = ev.at
            item.notes = (item.notes + "\n" if item.notes else "") + ev.payload
    return items


class Ledger:
    """Single-writer work ledger with an append-only audit log.

    All mutations go through one lock, which makes claim() a compare-and-set:
    of N concurrent claimers on an open item exactly one wins.
    """

    def __init__(
        self,
        directory: str | Path,
        clock: Clock,
        bus: Optional[EventBus] = None,
        max_fix_attempts: int = MAX_FIX_ATTEMPTS,
    ):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.bus = bus
        self.max_fix_attempts = max_fix_attempts
        self._lock = threading.RLock()
        self._items: dict[str, WorkItem] = {}
        self._seq = 0
        self._events_path = self.dir / EVENTS_FILE
        self._snapshot_path = self.dir / SNAPSHOT_FILE
        self._load()

    # -- persistence ----------------------------------------------------

    def _load(self) -> None:
        events = list(self.read_events())
        self._items = replay_events(events)
        self._seq = events[-1].seq if events else 0
        # ids are issued from a counter recovered from the event log, so they
        # are unique across the ledger's lifetime and deterministic
        self._id_counter = sum(1 for e in events if e.transition == "create")

    def read_events(self) -> list[LedgerEvent]:
        if not self._events_path.exists():
            return []
        out = []
        with open(self._events_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    out.append(_decode_event(line))
        return out

    def _append(self, item_id: str, actor: str, transition: str, payload: str) -> LedgerEvent:
        self._seq += 1
        ev = LedgerEvent(
            seq=self._seq,
            at=self.clock.now(),
            item_id=item_id,
            actor=actor,
            transition=transition,
            payload=payload,
        )
        try:
            with open(self._events_path, "a", encoding="utf-8") as f:
                f.write(_encode_event(ev) + "\n")
        except OSError as exc:
            self._seq -= 1
            raise LedgerError(f"persistence failure: {exc}") from exc
        return ev

    def write_snapshot(self) -> None:
        doc = {
            "last_seq": self._seq,
            "items": [self._items[k].to_dict() for k in sorted(self._items)],
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
        os.replace(tmp, self._snapshot_path)

    # -- operations -----------------------------------------------------

    def add_item(self, repo: str, kind: str, title: str, actor: str) -> WorkItem:
        if not title:
            raise LedgerError("title must be non-empty")
        if not actor:
            raise LedgerError("actor must be non-empty")
        if kind not in KINDS:
            raise LedgerError(f"unknown kind {kind!r}")
        with self._lock:
            self._id_counter += 1
            item_id = f"i{self._id_counter:06d}"
            payload = json.dumps({"repo": repo, "kind": kind, "title": title})
            ev = self._append(item_id, actor, "create", payload)
            item = WorkItem(
                id=item_id,
                repo=repo,
                kind=kind,
                title=title,
                status="open",
                actor=None,
                fix_attempts=0,
                notes="",
                created_at=ev.at,
                updated_at=ev.at,
            )
            self._items[item_id] = item
            return replace(item)

    def _get(self, item_id: str) -> WorkItem:
        item = self._items.get(item_id)
        if item is None:
            raise NotFound(item_id)
        return item

    def get(self, item_id: str) -> WorkItem:
        with self._lock:
            return replace(self._get(item_id))

    def claim(self, item_id: str, actor: str) -> WorkItem:
        if not actor:
            raise LedgerError("actor must be non-empty")
        with self._lock:
            item = self._get(item_id)
            if item.status == "in_progress":
                if item.actor == actor:
                    return replace(item)
                raise AlreadyClaimed(item.actor or "?")
            if item.status != "open":
                raise InvalidState(f"cannot claim item in status {item.status}")
            ev = self._append(item_id, actor, "open->in_progress", "")
            item.status = "in_progress"
            item.actor = actor
            item.updated_at = ev.at
            self._emit(eb.CLAIM, item, actor=actor)
            return replace(item)

    def list(
        self,
        status: Optional[str] = None,
        actor: Optional[str] = None,
        repo: Optional[str] = None,
    ) -> list[WorkItem]:
        with self._lock:
            matches = [
                replace(i)
                for i in self._items.values()
                if (status is None or i.status == status)
                and (actor is None or i.actor == actor)
                and (repo is None or i.repo == repo)
            ]
        return sorted(matches, key=lambda i: (i.created_at, i.id))

    def complete(self, item_id: str, actor: str, notes: str = "") -> WorkItem:
        with self._lock:
            item = self._get(item_id)
            if item.status != "in_progress":
                raise InvalidState(f"cannot complete item in status {item.status}")
            if item.actor != actor:
                raise NotOwner(f"owned by {item.actor}, not {actor}")
            ev = self._append(item_id, actor, "in_progress->done", notes)
            item.status = "done"
            item.notes = notes
            item.updated_at = ev.at
            self._emit(eb.COMPLETION, item, actor=actor)
            return replace(item)

    def fail_attempt(self, item_id: str, actor: str) -> WorkItem:
        with self._lock:
            item = self._get(item_id)
            if item.status != "in_progress":
                raise InvalidState(f"cannot fail item in status {item.status}")
            if item.actor != actor:
                raise NotOwner(f"owned by {item.actor}, not {actor}")
            attempts = item.fix_attempts + 1
            if attempts < self.max_fix_attempts:
                ev = self._append(item_id, actor, "in_progress->open", "")
                item.status = "open"
                item.actor = None
            else:
                ev = self._append(item_id, actor, "in_progress->skip", "")
                item.status = "skip"
                self._emit(
                    eb.ITEM_SKIPPED,
                    item,
                    actor=actor,
                    extra={"fix_attempts": attempts, "title": item.title},
                )
            item.fix_attempts = attempts
            item.updated_at = ev.at
            return replace(item)

    def escalate(self, item_id: str, reason: str) -> WorkItem:
        with self._lock:
            item = self._get(item_id)
            if item.status == "done":
                raise InvalidState("cannot escalate a done item")
            if item.status == "escalated":
                return replace(item)  # idempotent, no duplicate event
            ev = self._append(item_id, "", f"{item.status}->escalated", reason)
            item.status = "escalated"
            if reason:
                item.notes = (item.notes + "\n" if item.notes else "") + reason
            item.updated_at = ev.at
            self._emit(eb.ESCALATION, item, extra={"reason": reason, "title": item.title})
            return replace(item)

    # -- helpers --------------------------------------------------------

    def _emit(self, kind: str, item: WorkItem, actor: str = "", extra: Optional[dict] = None) -> None:
        if self.bus is None:
            return
        payload = {"status": item.status}
        if actor:
            payload["actor"] = actor
        if extra:
            payload.update(extra)
        self.bus.publish(
            FleetEvent(at=self.clock.now(), kind=kind, item_id=item.id, payload=payload)
        )

    def items_dict(self) -> dict[str, WorkItem]:
        with self._lock:
            return {k: replace(v) for k, v in self._items.items()}

    def materialized_json(self) -> str:
        """Canonical serialization of the item table, for replay comparison."""
        with self._lock:
            doc = [self._items[k].to_dict() for k in sorted(self._items)]
        return json.dumps(doc, sort_keys=True)


def replayed_json(events: Iterable[LedgerEvent]) -> str:
    items = replay_events(events)
    return json.dumps([items[k].to_dict() for k in sorted(items)], sort_keys=True)
