"""Independent discrete-event oracle for drain scenarios.

A single-loop model of the scheduling pipeline: ticks at a fixed period,
per-role cadence gating, fan-out kicks to every agent of a role, one claim
per kick, and fixed service times. It shares no code or constants with the
package under test, so agreement between the two is meaningful.

Timing conventions mirror the kernel's event ordering at equal instants:
an item completing exactly at a tick is already out of the queue when the
tick measures it, but the agent that finished it is not seen as idle again
until after that tick.
"""

TICK_SECS = 300.0

MODE_CADENCE = {
    "SURGE": {"scanner": 600.0, "reviewer": 600.0, "architect": None, "outreach": None},
    "BUSY": {"scanner": 900.0, "reviewer": 900.0, "architect": None, "outreach": None},
    "QUIET": {"scanner": 900.0, "reviewer": 1800.0, "architect": 3600.0, "outreach": 7200.0},
    "IDLE": {"scanner": 1800.0, "reviewer": 3600.0, "architect": 1800.0, "outreach": 1800.0},
}

ROLE_ORDER = ("scanner", "reviewer", "architect", "outreach")


def mode_of(queue: int) -> str:
    if queue > 20:
        return "SURGE"
    if queue > 10:
        return "BUSY"
    if queue > 2:
        return "QUIET"
    return "IDLE"


def drain_trace(
    items: int,
    agents: dict,
    service_time: float,
    horizon: float,
    tick: float = TICK_SECS,
) -> list[tuple[float, str]]:
    """(tick_time, mode) pairs for a burst of `items` arriving at t=0."""
    roster = [
        (role, i)
        for role in ROLE_ORDER
        for i in range(int(agents.get(role, 0)))
    ]
    busy_until = {a: -1.0 for a in roster}
    last_kick: dict[str, float] = {}
    open_pool = items
    completions: list[float] = []
    trace = []

    t = tick
    while t <= horizon:
        done = sum(1 for c in completions if c <= t)
        queue = items - done
        mode = mode_of(queue)
        trace.append((t, mode))
        for role in ROLE_ORDER:
            if agents.get(role, 0) == 0:
                continue
            cadence = MODE_CADENCE[mode][role]
            if cadence is None:
                continue
            if role in last_kick and t - last_kick[role] < cadence:
                continue
            last_kick[role] = t
            for agent in roster:
                if agent[0] != role or busy_until[agent] >= t:
                    continue
                if open_pool > 0:
                    open_pool -= 1
                    completions.append(t + service_time)
                    busy_until[agent] = t + service_time
                else:
                    busy_until[agent] = t  # empty kick, idle again next tick
        t += tick

    return trace


def first_mode_at(trace: list[tuple[float, str]], mode: str):
    for t, m in trace:
        if m == mode:
            return t
    return None
