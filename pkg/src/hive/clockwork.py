"""Injectable time source and timer scheduling.

Every module in the kernel takes a clock by injection and never reads wall
time directly, so the whole system can be driven deterministically by a
virtual clock in tests and simulations.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable, Optional, Protocol

Instant = float
Duration = float


class ClockError(Exception):
    pass


class TimerHandle:
    """Cancellation token for a scheduled callback."""

    __slots__ = ("deadline", "seq", "callback", "cancelled")

    def __init__(self, deadline: Instant, seq: int, callback: Callable[[], None]):
        self.deadline = deadline
        self.seq = seq
        self.callback = callback
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class _Periodic:
    """Self-rescheduling timer; shares the TimerHandle cancel interface."""

    def __init__(self, clock, period: Duration, callback: Callable[[], None]):
        self._clock = clock
        self._period = period
        self._callback = callback
        self.cancelled = False
        self._inner = clock.schedule(clock.now() + period, self._fire)

    def _fire(self) -> None:
        if self.cancelled:
            return
        # reschedule anchored to the previous deadline so firing count over
        # any span is exactly floor(elapsed/period)
        next_at = self._inner.deadline + self._period
        self._callback()
        if not self.cancelled:
            self._inner = self._clock.schedule(next_at, self._fire)

    def cancel(self) -> None:
        self.cancelled = True
        self._inner.cancel()


class Clock(Protocol):
    def now(self) -> Instant: ...

    def schedule(self, at: Instant, callback: Callable[[], None]) -> TimerHandle: ...

    def schedule_in(self, delay: Duration, callback: Callable[[], None]) -> TimerHandle: ...

    def every(self, period: Duration, callback: Callable[[], None]) -> TimerHandle: ...


class VirtualClock:
    """Deterministic clock: time moves only via advance().

    Timers due within an advanced span fire in (deadline, registration order),
    with the clock set to each timer's deadline while it runs. Callbacks may
    schedule further timers; those fire too if they fall within the span.
    """

    def __init__(self, start: Instant = 0.0):
        self._now: Instant = start
        self._heap: list[tuple[Instant, int, TimerHandle]] = []
        self._seq = itertools.count()
        self._lock = threading.RLock()

    def now(self) -> Instant:
        return self._now

    def schedule(self, at: Instant, callback: Callable[[], None]) -> TimerHandle:
        with self._lock:
            deadline = max(at, self._now)
            handle = TimerHandle(deadline, next(self._seq), callback)
            heapq.heappush(self._heap, (handle.deadline, handle.seq, handle))
            return handle

    def schedule_in(self, delay: Duration, callback: Callable[[], None]) -> TimerHandle:
        if delay < 0:
            raise ClockError("negative delay")
        return self.schedule(self._now + delay, callback)

    def every(self, period: Duration, callback: Callable[[], None]) -> _Periodic:
        """Periodic timer: first fire after one period, then every period."""
        if period <= 0:
            raise ClockError("period must be positive")
        return _Periodic(self, period, callback)

    def advance(self, d: Duration) -> Instant:
        """Move time forward by d, firing all due timers in deadline order."""
        if d < 0:
            raise ClockError("cannot advance backwards")
        with self._lock:
            target = self._now + d
            while self._heap and self._heap[0][0] <= target:
                deadline, _, handle = heapq.heappop(self._heap)
                if handle.cancelled:
                    continue
                self._now = deadline
                handle.callback()
            self._now = target
            return self._now


class RealClock:
    """Monotonic wall clock with a background dispatcher thread."""

    def __init__(self) -> None:
        self._heap: list[tuple[Instant, int, TimerHandle]] = []
        self._seq = itertools.count()
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def now(self) -> Instant:
        return time.monotonic()

    def advance(self, d: Duration) -> Instant:
        raise ClockError("advance() is only valid on a virtual clock")

    def schedule(self, at: Instant, callback: Callable[[], None]) -> TimerHandle:
        with self._cond:
            handle = TimerHandle(at, next(self._seq), callback)
            heapq.heappush(self._heap, (at, handle.seq, handle))
            self._cond.notify()
            return handle

    def schedule_in(self, delay: Duration, callback: Callable[[], None]) -> TimerHandle:
        return self.schedule(self.now() + max(delay, 0.0), callback)

    def every(self, period: Duration, callback: Callable[[], None]) -> _Periodic:
        return _Periodic(self, period, callback)

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()
        self._thread.join(timeout=2)

    def _run(self) -> None:
        while True:
            with self._cond:
                if self._stopped:
                    return
                now = self.now()
                due: Optional[TimerHandle] = None
                while self._heap and self._heap[0][0] <= now:
                    _, _, handle = heapq.heappop(self._heap)
                    if not handle.cancelled:
                        due = handle
                        break
                if due is None:
                    timeout = self._heap[0][0] - now if self._heap else None
                    self._cond.wait(timeout=timeout)
                    continue
            try:
                due.callback()
            except Exception:  # timer callbacks must not kill the dispatcher
                pass
