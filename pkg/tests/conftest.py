import pytest

from hive.bus import EventBus, EventLog
from hive.clockwork import VirtualClock


@pytest.fixture
def clock():
    return VirtualClock()


@pytest.fixture
def bus():
    return EventBus()


@pytest.fixture
def event_log(bus):
    return EventLog(bus)
