import logging
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from django.core.exceptions import ImproperlyConfigured

from consensus.conf import EngineConfig
from consensus.engine import (
    Ordering,
    derive_creator_table,
    finalisation_compare,
    open_merge_flag_tables,
    root_majority,
    sort_frame,
    strict_merge_flag_tables,
)
from consensus.events import Event, InternalTag, make_leaf_event
from consensus.exceptions import IntegrityFault, OrderingViolation, ProtocolViolation, SigningError
from consensus.tests.helpers import build_engines, deliver, naive_order_key

ZERO = bytes(32)


@pytest.mark.parametrize('n,expected', [(2, 2), (3, 2), (4, 2), (5, 3), (7, 3), (10, 4), (30, 11)])
def test_default_root_majority(n, expected):
    assert root_majority(n) == expected


def test_root_majority_override_bounds():
    assert root_majority(5, 4) == 4
    assert root_majority(2, 2) == 2
    with pytest.raises(ImproperlyConfigured):
        root_majority(5, 5)
    with pytest.raises(ImproperlyConfigured):
        root_majority(5, 1)
    with pytest.raises(ImproperlyConfigured):
        root_majority(2, 1)


def test_strict_merge_keeps_only_the_given_frame():
    a = {b'r1': 3, b'r2': 2}
    b = {b'r3': 3, b'r4': 4}
    assert strict_merge_flag_tables(3, a, b) == {b'r1': 3, b'r3': 3}


def test_open_merge_keeps_frames_at_or_after_the_floor():
    a = {b'r1': 1, b'r2': 2}
    b = {b'r2': 2, b'r3': 5}
    assert open_merge_flag_tables(2, a, b) == {b'r2': 2, b'r3': 5}


def test_merge_detects_disagreeing_frames():
    with pytest.raises(IntegrityFault):
        open_merge_flag_tables(0, {b'r1': 1}, {b'r1': 2})


@pytest.mark.parametrize('frame', [0, 1, 2, 3])
def test_strict_merge_refuses_disagreement_outside_the_kept_frame(frame):
    with pytest.raises(IntegrityFault):
        strict_merge_flag_tables(frame, {b'e': 1}, {b'e': 2})
    with pytest.raises(IntegrityFault):
        open_merge_flag_tables(3, {b'e': 1, b'f': 3}, {b'e': 2})


def test_creator_table_counts_creators_not_roots(scripted):
    engines, events = scripted
    store = engines[0].store
    table = {events['a1'].id: 1, events['a2'].id: 2, events['b1'].id: 1}
    assert derive_creator_table(table, 0, store) == {
        events['a1'].creator: 1, events['b1'].creator: 1,
    }
    assert derive_creator_table(table, 0, store, keep='max')[events['a1'].creator] == 2
    assert derive_creator_table(table, 2, store) == {events['a2'].creator: 2}


def test_scripted_frames_and_roots(scripted):
    _, events = scripted
    expected = {'a1': 1, 'b1': 1, 'a2': 2, 'b2': 2, 'a3': 3, 'c1': 1, 'd2': 2}
    for name, frame in expected.items():
        assert events[name].frame == frame, name
        assert events[name].is_root, name
    assert events['a4'].frame == 3
    assert not events['a4'].is_root


def test_scripted_lamport_timestamps(scripted):
    _, events = scripted
    stamps = {name: events[name].lamport_timestamp for name in ('a1', 'b1', 'a2', 'b2', 'c1', 'd1', 'c2', 'd2', 'a3')}
    assert stamps == {'a1': 1, 'b1': 2, 'a2': 3, 'b2': 4, 'c1': 1, 'd1': 2, 'c2': 3, 'd2': 4, 'a3': 5}


def test_frames_finalise_once_every_creator_is_seen_in_a_later_frame(scripted):
    engines, events = scripted
    a = engines[0]
    assert events['finalised_before_a4'] is None
    assert [order.frame for order in a.store.finalised] == [0, 1]
    assert a.state.last_finalised_frame == 1
    assert engines[1].state.last_finalised_frame is None


def test_finalised_frame_order(scripted):
    engines, events = scripted
    store = engines[0].store
    frame_one = store.finalised[1].ordered_events
    early = sorted([events['a1'].hash, events['c1'].hash])
    late = sorted([events['b1'].hash, events['d1'].hash])
    assert list(frame_one) == early + late
    frame_zero = store.finalised[0].ordered_events
    assert list(frame_zero) == sorted(frame_zero)
    assert len(frame_zero) == 4


def test_finalised_events_lose_their_flag_tables(scripted):
    engines, events = scripted
    store = engines[0].store
    assert store.get_event(events['a1'].id).flag_table == {}
    assert store.get_event(events['a2'].id).flag_table != {}


def test_frames_replay_identically_on_another_node(scripted):
    engines, events = scripted
    a, b = engines[0], engines[1]
    for name in ('b2', 'a3', 'c1', 'd1', 'c2', 'd2', 'a4'):
        if events[name].id not in b.store:
            deliver(events[name], b)
    for name in ('a1', 'a2', 'a3', 'a4', 'c2', 'd2'):
        mine = a.store.get_event(events[name].id)
        theirs = b.store.get_event(events[name].id)
        assert (mine.frame, mine.is_root) == (theirs.frame, theirs.is_root), name
    assert b.store.finalised == a.store.finalised


def chain(name, timestamps, hashes):
    """A synthetic self-parent chain; the first timestamp belongs to the leaf."""
    events = []
    parent = None
    for height, (timestamp, digest) in enumerate(zip(timestamps, hashes)):
        event = Event(
            creator=name,
            height=height,
            self_parent_id=parent.id if parent else ZERO,
            self_parent_hash=parent.hash if parent else ZERO,
            other_parent_id=ZERO,
            other_parent_hash=ZERO,
            lamport_timestamp=timestamp,
            hash=digest,
        )
        events.append(event)
        parent = event
    return events


@pytest.fixture
def synthetic():
    x = chain(b'x', [3, 5], [b'\x10' * 32, b'\x09' * 32])
    y = chain(b'y', [0, 3, 5], [b'\x11' * 32, b'\x12' * 32, b'\x02' * 32])
    store = SimpleNamespace(get_event={event.id: event for event in x + y}.get)
    return x, y, store


def test_lower_timestamp_sorts_first(synthetic):
    x, y, store = synthetic
    assert finalisation_compare(x[1], y[1], store) is Ordering.GREATER
    assert finalisation_compare(y[1], x[1], store) is Ordering.LESS


def test_shorter_chain_sorts_first_on_equal_ancestry(synthetic):
    x, y, store = synthetic
    assert finalisation_compare(x[1], y[2], store) is Ordering.LESS
    assert finalisation_compare(y[2], x[1], store) is Ordering.GREATER


def test_depth_limit_falls_back_to_hashes(synthetic):
    x, y, store = synthetic
    assert finalisation_compare(x[1], y[2], store, depth=1) is Ordering.GREATER


def test_comparing_an_event_with_itself_is_an_error(synthetic):
    x, _, store = synthetic
    with pytest.raises(ValueError):
        finalisation_compare(x[1], x[1], store)


def test_sort_frame_is_total(synthetic):
    x, y, store = synthetic
    ordered = sort_frame([y[2], x[1], y[1], x[0]], store)
    assert ordered == [x[0], y[1], x[1], y[2]]


def random_frame(rng):
    """Up to 50 events drawn from short chains whose timestamps often collide."""
    events = []
    for creator in range(int(rng.integers(1, 9))):
        length = int(rng.integers(1, 9))
        timestamps = np.cumsum(rng.integers(1, 3, size=length)) + int(rng.integers(0, 4))
        events += chain(bytes([creator]), [int(value) for value in timestamps], [rng.bytes(32) for _ in range(length)])
    store = SimpleNamespace(get_event={event.id: event for event in events}.get)
    size = int(rng.integers(1, min(50, len(events)) + 1))
    picks = rng.choice(len(events), size=size, replace=False)
    return [events[int(index)] for index in picks], store


def test_sort_frame_matches_a_plain_sort_on_random_frames():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        frame, store = random_frame(rng)
        depth = [None, None, 1, 2, 3][int(rng.integers(5))]
        expected = sorted(frame, key=lambda event: naive_order_key(event, store, depth))
        assert [event.id for event in sort_frame(frame, store, depth)] == [event.id for event in expected]


def test_create_event_refuses_self_as_other_parent(engines):
    a = engines[0]
    with pytest.raises(ProtocolViolation):
        a.create_event(a.state.me.id)


def test_signing_failure_keeps_pending_work(engines):
    a, b = engines[0], engines[1]
    a.submit(b'keep-me')
    a.state.key = None
    with pytest.raises(SigningError):
        a.create_event(b.state.me.id)
    assert list(a.state.pending_user_tx) == [b'keep-me']
    assert a.state.height == 0
    assert len(a.store.chain_of(a.state.me.id)) == 1


def test_created_event_drains_pending_transactions(engines):
    a, b = engines[0], engines[1]
    a.submit(b'tx-1')
    a.submit_internal(InternalTag.MEMBERSHIP, b'join')
    event = a.create_event(b.state.me.id)
    assert event.payload.user_transactions == (b'tx-1',)
    assert event.payload.internal_transactions[0].tag == InternalTag.MEMBERSHIP
    assert not a.state.has_pending
    assert a.state.gossip_list[a.state.me.id].event_id == event.id


def test_event_that_does_not_advance_the_clock_is_refused(engines):
    a, b = engines[0], engines[1]
    event = a.create_event(b.state.me.id).detached()
    event.lamport_timestamp = 0
    event.hash = a.crypto.hash_event(event)
    with pytest.raises(ProtocolViolation):
        b.receive_event(event)


def test_event_with_wrong_height_is_refused(engines):
    a, b = engines[0], engines[1]
    event = a.create_event(b.state.me.id).detached()
    event.height = 2
    event.hash = a.crypto.hash_event(event)
    with pytest.raises(ProtocolViolation):
        b.receive_event(event)


def test_known_leaves_are_ignored_and_foreign_leaves_refused(engines):
    a, b = engines[0], engines[1]
    leaf = a.store.last_event_of(a.state.me.id).detached()
    assert b.store.get_event(leaf.id) is not None
    assert b.receive_event(leaf) == []
    forged = make_leaf_event(a.state.me.id, a.state.peer_list, a.crypto, initial_lamport=5)
    with pytest.raises(ProtocolViolation):
        b.receive_event(forged.detached())


def test_finalising_out_of_order_is_refused(engines):
    with pytest.raises(OrderingViolation):
        engines[0].finalise_frame(3)


def test_should_create_event_tracks_unseen_peer_events(engines):
    a, b = engines[0], engines[1]
    peer = b.state.me.id
    # the peer's leaf is not referenced yet
    assert a.should_create_event(peer)
    a.create_event(peer)
    assert not a.should_create_event(peer)
    b1 = b.create_event(a.state.me.id)
    deliver(b1, a)
    assert a.should_create_event(peer)
    a.create_event(peer)
    assert not a.should_create_event(peer)
    a.submit(b'work')
    assert a.should_create_event(peer)


def test_flag_tables_survive_finalisation_when_stripping_is_off(scripted):
    _, events = scripted
    fresh = build_engines(4, EngineConfig(strip_flag_tables=False))[0]
    for name in ('a1', 'b1', 'a2', 'b2', 'a3', 'c1', 'd1', 'c2', 'd2', 'a4'):
        fresh.replay([events[name]])
    assert [order.frame for order in fresh.store.finalised] == [0, 1]
    assert fresh.store.get_event(events['a1'].id).flag_table


def test_sink_failures_are_logged_and_delivery_continues(engines, caplog):
    a = engines[0]
    a.config = EngineConfig(strip_flag_tables=False)
    received = []

    def broken(tx, event):
        raise RuntimeError('sink down')

    a.add_delivery_sink(broken)
    a.add_delivery_sink(lambda tx, event: received.append(tx))
    a.submit(b'one')
    a.submit(b'two')
    event = a.create_event(engines[1].state.me.id)
    with caplog.at_level(logging.ERROR, logger='consensus.engine'):
        a.finalise_event(event)
    assert received == [b'one', b'two']
    assert 'Delivery sink failed' in caplog.text


def test_unknown_internal_tags_are_skipped_with_a_warning(engines, caplog):
    a = engines[0]
    seen = []
    a.register_internal_handler(InternalTag.MEMBERSHIP, lambda tx, event: seen.append(tx.body))
    a.submit_internal(InternalTag.MEMBERSHIP, b'm')
    a.submit_internal(99, b'?')
    a.config = EngineConfig(strip_flag_tables=False)
    event = a.create_event(engines[1].state.me.id)
    with caplog.at_level(logging.WARNING, logger='consensus.engine'):
        a.finalise_event(event)
    assert seen == [b'm']
    assert 'unknown tag 99' in caplog.text


root_tables = st.dictionaries(
    st.sampled_from([bytes([index]) * 4 for index in range(8)]),
    st.integers(min_value=0, max_value=4),
    max_size=8,
)


@settings(max_examples=1000, deadline=None)
@given(st.integers(min_value=0, max_value=4), root_tables, root_tables)
def test_open_merge_contains_strict_merge(frame, a, b):
    # a shared id must carry the same frame in both tables
    b = {event_id: a.get(event_id, value) for event_id, value in b.items()}
    strict = strict_merge_flag_tables(frame, a, b)
    opened = open_merge_flag_tables(frame, a, b)
    assert strict.items() <= opened.items()
    assert all(value == frame for value in strict.values())
    assert open_merge_flag_tables(0, a, b) == {**a, **b}
    assert open_merge_flag_tables(frame, a, b) == open_merge_flag_tables(frame, b, a)


@settings(max_examples=200, deadline=None)
@given(root_tables, st.integers(min_value=0, max_value=4))
def test_creator_table_is_bounded_by_creators(table, min_frame):
    # eight roots spread over three creators
    roots = {bytes([index]) * 4: SimpleNamespace(creator=index % 3) for index in range(8)}
    store = SimpleNamespace(get_event=roots.get)
    for keep in ('min', 'max'):
        creators = derive_creator_table(table, min_frame, store, keep=keep)
        assert len(creators) <= min(len(table), 3)
        assert all(frame >= min_frame for frame in creators.values())
