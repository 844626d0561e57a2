"""
Frame assignment, root detection and finalisation.

Every node inserts events into its local DAG and derives, per event, a
frame number, whether it is a root and a flag table of the roots it can
see. Frames and roots depend on the DAG alone, so honest nodes derive the
same values. A frame is finalised once a newly stored event sees, for
every creator, a root in a later frame; the frame's events are then sorted
by a deterministic comparator and delivered.
"""

import functools
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Deque, Dict, List, Optional

from django.core.exceptions import ImproperlyConfigured

from consensus.conf import EngineConfig
from consensus.events import (
    CreatorFlagTable,
    Event,
    FinalOrder,
    FlagTable,
    GossipEntry,
    InternalTag,
    InternalTransaction,
    TransactionPayload,
    make_leaf_event,
)
from consensus.exceptions import IntegrityFault, OrderingViolation, ProtocolViolation
from consensus.peers import PeerInfo, PeerList, lamport_init
from consensus.store import EventStore

logger = logging.getLogger(__name__)

DeliverySink = Callable[[bytes, Event], None]
InternalHandler = Callable[[InternalTransaction, Event], None]


def root_majority(n: int, override: Optional[int] = None) -> int:
    """Number of distinct creators whose roots promote an event to the next frame.

    Defaults to the nearest integer to n/3 + 1. An override must lie in
    [2, n - 1]; for two peers the only value is 2.
    """
    if n < 2:
        raise ImproperlyConfigured('A network needs at least two peers')
    low, high = 2, max(2, n - 1)
    if override is not None:
        if not low <= override <= high:
            raise ImproperlyConfigured(
                f'Root majority {override} is outside [{low}, {high}] for {n} peers'
            )
        return override
    return min(max((2 * (n + 3) + 3) // 6, low), high)


def _merge_flag_tables(a: FlagTable, b: FlagTable, keep: Callable[[int], bool]) -> FlagTable:
    # shared roots must agree even where the filter would drop them
    for event_id in a.keys() & b.keys():
        if a[event_id] != b[event_id]:
            raise IntegrityFault(
                f'Root {event_id.hex()[:8]} listed with frames {a[event_id]} and {b[event_id]}'
            )
    return {event_id: frame for event_id, frame in {**a, **b}.items() if keep(frame)}


def strict_merge_flag_tables(frame: int, a: FlagTable, b: FlagTable) -> FlagTable:
    """Union of the entries of ``a`` and ``b`` that sit exactly at ``frame``."""
    return _merge_flag_tables(a, b, lambda value: value == frame)


def open_merge_flag_tables(min_frame: int, a: FlagTable, b: FlagTable) -> FlagTable:
    """Union of the entries of ``a`` and ``b`` at ``min_frame`` or later."""
    return _merge_flag_tables(a, b, lambda value: value >= min_frame)


def derive_creator_table(table: FlagTable, min_frame: int, store: EventStore,
                         keep: str = 'min') -> CreatorFlagTable:
    """Collapse a flag table to one frame per creator.

    ``keep='min'`` records the lowest frame seen per creator, ``keep='max'``
    the highest. Root detection only needs the size of the result;
    finalisation reads the per-creator maxima.
    """
    if keep not in ('min', 'max'):
        raise ValueError(f'keep must be "min" or "max", not {keep!r}')
    creators: CreatorFlagTable = {}
    for event_id, frame in table.items():
        if frame < min_frame:
            continue
        root = store.get_event(event_id)
        if root is None:
            raise IntegrityFault(f'Flag table names unknown root {event_id.hex()[:8]}')
        current = creators.get(root.creator)
        if current is None or (frame < current if keep == 'min' else frame > current):
            creators[root.creator] = frame
    return creators


class Ordering(IntEnum):
    LESS = -1
    GREATER = 1


def _compare_values(a, b) -> Optional[Ordering]:
    if a == b:
        return None
    return Ordering.LESS if a < b else Ordering.GREATER


def finalisation_compare(a: Event, b: Event, store: EventStore,
                         depth: Optional[int] = None) -> Ordering:
    """Total order on the events of one frame.

    Compare Lamport timestamps, then the timestamps of self-ancestors level
    by level (a chain that ends first sorts first), then hashes, then ids.
    ``depth`` limits how many self-ancestor levels are inspected.
    """
    result = _compare_values(a.lamport_timestamp, b.lamport_timestamp)
    if result is not None:
        return result
    left, right, level = a, b, 0
    while depth is None or level < depth:
        left_parent = store.get_event(left.self_parent_id) if not left.is_leaf else None
        right_parent = store.get_event(right.self_parent_id) if not right.is_leaf else None
        if (left_parent is None and not left.is_leaf) or (right_parent is None and not right.is_leaf):
            raise IntegrityFault('Self-ancestor missing while ordering a frame')
        if left_parent is None or right_parent is None:
            if left_parent is None and right_parent is not None:
                return Ordering.LESS
            if right_parent is None and left_parent is not None:
                return Ordering.GREATER
            break
        result = _compare_values(left_parent.lamport_timestamp, right_parent.lamport_timestamp)
        if result is not None:
            return result
        left, right, level = left_parent, right_parent, level + 1
    result = _compare_values(a.hash, b.hash) or _compare_values(a.id, b.id)
    if result is None:
        raise ValueError('An event cannot be ordered against itself')
    return result


def sort_frame(events: List[Event], store: EventStore, depth: Optional[int] = None) -> List[Event]:
    key = functools.cmp_to_key(lambda a, b: int(finalisation_compare(a, b, store, depth)))
    return sorted(events, key=key)


@dataclass
class NodeState:
    me: PeerInfo
    key: object
    peer_list: PeerList
    lamport: int
    height: int = 0
    current_frame: int = 0
    last_finalised_frame: Optional[int] = None
    gossip_list: Dict[bytes, GossipEntry] = field(default_factory=dict)
    pending_user_tx: Deque[bytes] = field(default_factory=deque)
    pending_internal_tx: Deque[InternalTransaction] = field(default_factory=deque)
    peer_selection_round: int = 0

    @property
    def first_open_frame(self) -> int:
        return 0 if self.last_finalised_frame is None else self.last_finalised_frame + 1

    @property
    def has_pending(self) -> bool:
        return bool(self.pending_user_tx or self.pending_internal_tx)


@dataclass
class InsertionOutcome:
    event_frame: int
    became_root: bool
    frames_finalised: List[int] = field(default_factory=list)


def _ignore_reserved(transaction: InternalTransaction, event: Event) -> None:
    logger.debug('Internal transaction with reserved tag %d in %s', transaction.tag, event.short_id)


class ConsensusEngine:
    """
    Per-node consensus state machine.

    All mutating entry points take ``lock``; the gossip layer holds it while
    it applies a reply or builds one, so the two sync procedures never
    interleave on the same node.

    Attributes:
        state (NodeState): clock, height, frames, gossip list and pending work
        store (EventStore): the local DAG
        crypto (CryptoService): hashing and signing
        root_majority (int): creators needed to promote an event to a new frame
    """

    def __init__(self, state: NodeState, store: EventStore, crypto, config: Optional[EngineConfig] = None):
        self.state = state
        self.store = store
        self.crypto = crypto
        self.config = config or EngineConfig()
        self.root_majority = root_majority(state.peer_list.n, self.config.root_majority)
        self.lock = threading.RLock()
        self._delivery_sinks: List[DeliverySink] = []
        self._internal_handlers: Dict[int, InternalHandler] = {
            tag.value: _ignore_reserved for tag in InternalTag
        }
        self._released: Deque[Event] = deque()

    @classmethod
    def bootstrap(cls, key, peer_list: PeerList, crypto, config: Optional[EngineConfig] = None,
                  store: Optional[EventStore] = None) -> 'ConsensusEngine':
        """Create an engine for ``key``'s peer with every peer's leaf already stored."""
        config = config or EngineConfig()
        me = peer_list.get(key.peer_id)
        state = NodeState(
            me=me,
            key=key,
            peer_list=peer_list,
            lamport=lamport_init(config.lamport_init, me.id, config.lamport_byte_index),
        )
        if store is None:
            store = EventStore(config.orphan_capacity, config.orphan_timeout)
        engine = cls(state, store, crypto, config)
        for peer in peer_list:
            leaf = make_leaf_event(
                peer.id,
                peer_list,
                crypto,
                current_frame=0,
                initial_lamport=lamport_init(config.lamport_init, peer.id, config.lamport_byte_index),
                key=key,
            )
            store.put_event(leaf)
            engine._observe(leaf, advance_clock=False)
        return engine

    def add_delivery_sink(self, sink: DeliverySink) -> None:
        self._delivery_sinks.append(sink)

    def register_internal_handler(self, tag: int, handler: InternalHandler) -> None:
        self._internal_handlers[int(tag)] = handler

    def submit(self, transaction: bytes) -> None:
        with self.lock:
            self.state.pending_user_tx.append(bytes(transaction))

    def submit_internal(self, tag: int, body: bytes = b'') -> None:
        with self.lock:
            self.state.pending_internal_tx.append(InternalTransaction(int(tag), bytes(body)))

    def _observe(self, event: Event, advance_clock: bool = True) -> None:
        state = self.state
        entry = state.gossip_list.get(event.creator)
        if entry is None or event.lamport_timestamp > entry.lamport_timestamp:
            state.gossip_list[event.creator] = GossipEntry(event.lamport_timestamp, event.id)
        if advance_clock:
            state.lamport = max(state.lamport, event.lamport_timestamp)
        state.current_frame = max(state.current_frame, event.frame)

    def _check_structure(self, event: Event, self_parent: Event, other_parent: Event) -> None:
        self.state.peer_list.get(event.creator)
        if self_parent.creator != event.creator:
            raise ProtocolViolation(f'Self-parent of {event.short_id} belongs to another creator')
        if other_parent.creator == event.creator:
            raise ProtocolViolation(f'Other-parent of {event.short_id} belongs to its own creator')
        if event.height != self_parent.height + 1:
            raise ProtocolViolation(
                f'Event {event.short_id} has height {event.height}, '
                f'self-parent has {self_parent.height}'
            )
        if event.self_parent_hash != self_parent.hash or event.other_parent_hash != other_parent.hash:
            raise IntegrityFault(f'Parent hashes of {event.short_id} do not match stored parents')
        if event.lamport_timestamp <= max(self_parent.lamport_timestamp, other_parent.lamport_timestamp):
            raise ProtocolViolation(f'Event {event.short_id} does not advance past its parents')

    def insert_event(self, event: Event) -> InsertionOutcome:
        """
        Assign frame, root flag and flag table to ``event`` and store it.

        Args:
            event (Event): event whose parents are both stored

        Returns:
            InsertionOutcome: the frame, whether it became a root and any frames
                finalised because of it
        """
        with self.lock:
            known = self.store.get_event(event.id)
            if known is not None:
                return InsertionOutcome(known.frame, known.is_root)
            self_parent = self.store.get_event(event.self_parent_id)
            other_parent = self.store.get_event(event.other_parent_id)
            if self_parent is None or other_parent is None:
                raise ProtocolViolation(f'Parents of {event.short_id} must be stored before insertion')
            self._check_structure(event, self_parent, other_parent)

            floor = self.state.first_open_frame
            if self_parent.frame == other_parent.frame:
                table = strict_merge_flag_tables(
                    self_parent.frame, self_parent.flag_table, other_parent.flag_table
                )
                creators = derive_creator_table(table, self_parent.frame, self.store)
                is_root = len(creators) >= self.root_majority
                frame = self_parent.frame + 1 if is_root else self_parent.frame
            elif self_parent.frame > other_parent.frame:
                is_root, frame = False, self_parent.frame
            else:
                is_root, frame = True, other_parent.frame
            if frame < floor:
                raise ProtocolViolation(
                    f'Event {event.short_id} lands in finalised frame {frame}'
                )

            visibilis = open_merge_flag_tables(floor, self_parent.flag_table, other_parent.flag_table)
            if is_root:
                visibilis[event.id] = frame
            heights = dict(self_parent.visible_heights)
            for creator, height in other_parent.visible_heights.items():
                if height > heights.get(creator, -1):
                    heights[creator] = height
            heights[event.creator] = event.height

            event.frame = frame
            event.is_root = is_root
            event.flag_table = visibilis
            event.visible_heights = heights
            put = self.store.put_event(event)
            self._released.extend(put.released)
            self._observe(event)

            outcome = InsertionOutcome(frame, is_root)
            seen = derive_creator_table(visibilis, floor, self.store, keep='max')
            if len(seen) == self.state.peer_list.n:
                for finalisable in range(floor, min(seen.values())):
                    self.finalise_frame(finalisable)
                    outcome.frames_finalised.append(finalisable)
            logger.debug('Inserted %r', event)
            return outcome

    def receive_event(self, event: Event, now: int = 0) -> List[InsertionOutcome]:
        """Insert a verified event from a peer, buffering it if parents are missing.

        Orphans released by the insertion are inserted as well; each
        insertion contributes one outcome.
        """
        with self.lock:
            if event.id in self.store:
                return []
            if event.is_leaf:
                raise ProtocolViolation(f'Leaf {event.short_id} arrived over the wire')
            missing = self.store.missing_parents(event)
            if missing:
                self.store.buffer_orphan(event, missing, now)
                return []
            outcomes = [self.insert_event(event)]
            while self._released:
                orphan = self._released.popleft()
                if orphan.id in self.store:
                    continue
                try:
                    outcomes.append(self.insert_event(orphan))
                except ProtocolViolation as exc:
                    logger.warning('Dropping released orphan %s: %s', orphan.short_id, exc)
            return outcomes

    def should_create_event(self, peer: bytes) -> bool:
        """Pending work, or the peer's newest event is unfinalised and not yet seen by us."""
        with self.lock:
            if self.state.has_pending:
                return True
            own = self.store.last_event_of(self.state.me.id)
            other = self.store.last_event_of(peer)
            if self.store.is_finalised(other):
                return False
            return own.visible_heights.get(peer, -1) < other.height

    def create_event(self, other: bytes) -> Event:
        """Create, sign and insert a new event on top of our newest one.

        The other-parent is the newest known event of ``other``. Pending
        transactions are only drained once signing has succeeded.
        """
        with self.lock:
            state = self.state
            me = state.me.id
            if other == me:
                raise ProtocolViolation('The other-parent must come from another peer')
            state.peer_list.get(other)
            self_parent = self.store.last_event_of(me)
            other_parent = self.store.last_event_of(other)
            lamport = max(state.lamport, self_parent.lamport_timestamp, other_parent.lamport_timestamp) + 1
            event = Event(
                creator=me,
                height=self_parent.height + 1,
                self_parent_id=self_parent.id,
                self_parent_hash=self_parent.hash,
                other_parent_id=other_parent.id,
                other_parent_hash=other_parent.hash,
                lamport_timestamp=lamport,
                payload=TransactionPayload(
                    tuple(state.pending_user_tx), tuple(state.pending_internal_tx)
                ),
            )
            event.hash = self.crypto.hash_event(event)
            event.add_signature(me, self.crypto.sign_event(event, state.key))
            state.height = event.height
            state.lamport = lamport
            state.pending_user_tx.clear()
            state.pending_internal_tx.clear()
            self.insert_event(event)
            return event

    def finalise_frame(self, frame: int) -> FinalOrder:
        with self.lock:
            expected = self.state.first_open_frame
            if frame != expected:
                raise OrderingViolation(f'Expected to finalise frame {expected}, got {frame}')
            ordered = sort_frame(self.store.events_in_frame(frame), self.store, self.config.compare_depth)
            order = FinalOrder(frame, tuple(event.id for event in ordered))
            self.store.record_final_order(order)
            self.state.last_finalised_frame = frame
            for event in ordered:
                self.finalise_event(event)
            logger.info(
                'Node %s finalised frame %d with %d events',
                self.state.me.short_id, frame, len(ordered),
            )
            return order

    def finalise_event(self, event: Event) -> None:
        """Deliver user transactions, run internal ones, then drop the flag table."""
        for transaction in event.payload.user_transactions:
            for sink in self._delivery_sinks:
                try:
                    sink(transaction, event)
                except Exception:
                    logger.exception('Delivery sink failed on event %s', event.short_id)
        for internal in event.payload.internal_transactions:
            handler = self._internal_handlers.get(internal.tag)
            if handler is None:
                logger.warning(
                    'Skipping internal transaction with unknown tag %d in %s',
                    internal.tag, event.short_id,
                )
                continue
            handler(internal, event)
        if self.config.strip_flag_tables:
            self.store.strip_flag_table(event.id)

    def replay(self, events: List[Event]) -> int:
        """Re-insert journaled events after a restart. Returns how many were new."""
        inserted = 0
        journal, self.store.journal = self.store.journal, None
        try:
            for event in events:
                if event.is_leaf or event.id in self.store:
                    continue
                inserted += len(self.receive_event(event.detached()))
        finally:
            self.store.journal = journal
        return inserted
