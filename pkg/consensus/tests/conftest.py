import pytest

from consensus.crypto import CryptoService
from consensus.tests.helpers import build_engines, deliver


@pytest.fixture
def crypto():
    return CryptoService()


@pytest.fixture
def engines():
    return build_engines(4)


@pytest.fixture
def scripted(engines):
    """
    Four engines A-D. A and B gossip privately up to frame 2, so do C and D;
    then A learns the C/D history and builds on it.
    """
    a, b, c, d = engines
    ids = [engine.state.me.id for engine in engines]
    events = {}

    events['a1'] = a.create_event(ids[1])
    deliver(events['a1'], b)
    events['b1'] = b.create_event(ids[0])
    deliver(events['b1'], a)
    events['a2'] = a.create_event(ids[1])
    deliver(events['a2'], b)
    events['b2'] = b.create_event(ids[0])

    events['c1'] = c.create_event(ids[3])
    deliver(events['c1'], d)
    events['d1'] = d.create_event(ids[2])
    deliver(events['d1'], c)
    events['c2'] = c.create_event(ids[3])
    deliver(events['c2'], d)
    events['d2'] = d.create_event(ids[2])

    deliver(events['b2'], a)
    events['a3'] = a.create_event(ids[1])
    for name in ('c1', 'd1', 'c2', 'd2'):
        deliver(events[name], a)
    events['finalised_before_a4'] = a.state.last_finalised_frame
    events['a4'] = a.create_event(ids[3])
    return engines, events
