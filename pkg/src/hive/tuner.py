"""Self-tuning rotation weights from PR acceptance outcomes.

Counters (merged/closed per category) are the source of truth; weights are
derived state, recomputed on every outcome and after every reload.
Categories that fall below a 20% acceptance rate with enough samples are
blocked outright (weight 0) and can never be picked for rotation.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .clockwork import Clock, Instant

BLOCK_RATE = 0.20
BOOST_FACTOR = 1.5
MIN_SAMPLES = 5
NEUTRAL_WEIGHT = 0.5

NO_DATA = None


class AllBlocked(Exception):
    pass


@dataclass
class TuningRecord:
    category: str
    merged: int = 0
    closed: int = 0
    weight: float = NEUTRAL_WEIGHT
    updated_at: Instant = 0.0


def acceptance_rate(record: TuningRecord) -> Optional[float]:
    """merged / (merged + closed); NO_DATA (None) with no samples."""
    total = record.merged + record.closed
    if total == 0:
        return NO_DATA
    return record.merged / total


def weight_for(rate: Optional[float], samples: int, min_samples: int = MIN_SAMPLES) -> float:
    if rate is NO_DATA or samples < min_samples:
        return NEUTRAL_WEIGHT
    if rate < BLOCK_RATE:
        return 0.0
    return min(1.0, BOOST_FACTOR * rate)


def pick_category(records: list[TuningRecord], rng_seed: Union[int, random.Random]) -> str:
    """Weighted random pick, deterministic given seed. Never picks weight 0."""
    eligible = [(r.category, r.weight) for r in records if r.weight > 0]
    if not eligible:
        raise AllBlocked("every category has weight 0")
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    total = sum(w for _, w in eligible)
    x = rng.random() * total
    acc = 0.0
    for category, w in eligible:
        acc += w
        if x < acc:
            return category
    return eligible[-1][0]


class Tuner:
    """Persistent per-category outcome counters with derived weights."""

    def __init__(self, path: str | Path, clock: Clock, min_samples: int = MIN_SAMPLES):
        self.path = Path(path)
        self.clock = clock
        self.min_samples = min_samples
        self._records: dict[str, TuningRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        for category, d in doc.items():
            rec = TuningRecord(
                category=category,
                merged=d["merged"],
                closed=d["closed"],
                updated_at=d.get("updated_at", 0.0),
            )
            self._recompute(rec)
            self._records[category] = rec

    def _save(self) -> None:
        doc = {
            r.category: {
                "merged": r.merged,
                "closed": r.closed,
                "weight": r.weight,
                "updated_at": r.updated_at,
            }
            for r in sorted(self._records.values(), key=lambda r: r.category)
        }
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        os.replace(tmp, self.path)

    def _recompute(self, rec: TuningRecord) -> None:
        rec.weight = weight_for(
            acceptance_rate(rec), rec.merged + rec.closed, self.min_samples
        )

    def record_outcome(self, category: str, outcome: str) -> TuningRecord:
        if not category:
            raise ValueError("category must be non-empty")
        if outcome not in ("merged", "closed"):
            raise ValueError(f"outcome must be merged|closed, got {outcome!r}")
        rec = self._records.setdefault(category, TuningRecord(category=category))
        if outcome == "merged":
            rec.merged += 1
        else:
            rec.closed += 1
        rec.updated_at = self.clock.now()
        self._recompute(rec)
        self._save()
        return rec

    def get(self, category: str) -> Optional[TuningRecord]:
        return self._records.get(category)

    def records(self) -> list[TuningRecord]:
        return sorted(self._records.values(), key=lambda r: r.category)

    def pick(self, rng_seed: Union[int, random.Random]) -> str:
        return pick_category(self.records(), rng_seed)
