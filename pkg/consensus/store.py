"""
Event storage.

The store indexes events by id, by creator chain and by frame, keeps the
orphan buffer for events whose parents have not arrived, records the
finalised frame log and optionally journals every stored event.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Set, Tuple

from consensus import codec
from consensus.conf import DEFAULT_ORPHAN_CAPACITY, DEFAULT_ORPHAN_TIMEOUT
from consensus.events import Event, FinalOrder
from consensus.exceptions import (
    IntegrityFault,
    OrderingViolation,
    OrphanBufferFull,
    ProtocolViolation,
    UnknownPeer,
)

logger = logging.getLogger(__name__)


class PutStatus(str, Enum):
    STORED = 'stored'
    ALREADY_KNOWN = 'already_known'


class PutOutcome(NamedTuple):
    status: PutStatus
    # orphans whose parents are now all stored, oldest first
    released: Tuple[Event, ...] = ()


@dataclass
class _Orphan:
    event: Event
    missing: Set[bytes]
    buffered_at: int
    flagged: bool = False


@dataclass
class EventJournal:
    """Append-only file of event records behind a suite/peer-list header."""

    path: Path
    suite_name: str
    peer_list_digest: bytes
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.path = Path(self.path)
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(codec.journal_header(self.suite_name, self.peer_list_digest))
            return
        suite_name, digest, _ = codec.read_journal(self.path.read_bytes())
        if suite_name != self.suite_name or digest != self.peer_list_digest:
            raise IntegrityFault(f'Journal {self.path} belongs to a different network')

    def append(self, event: Event) -> None:
        with self.path.open('ab') as handle:
            handle.write(codec.journal_record(event))

    def read(self) -> List[Event]:
        return codec.read_journal(self.path.read_bytes())[2]


class EventStore:
    def __init__(self, orphan_capacity: int = DEFAULT_ORPHAN_CAPACITY,
                 orphan_timeout: int = DEFAULT_ORPHAN_TIMEOUT,
                 journal: Optional[EventJournal] = None):
        self.orphan_capacity = orphan_capacity
        self.orphan_timeout = orphan_timeout
        self.journal = journal
        self.finalised: List[FinalOrder] = []
        self._by_id: Dict[bytes, Event] = {}
        self._chains: Dict[bytes, List[Event]] = {}
        self._by_frame: Dict[int, Set[bytes]] = defaultdict(set)
        self._orphans: Dict[bytes, _Orphan] = {}
        self._waiting: Dict[bytes, Set[bytes]] = defaultdict(set)

    def __contains__(self, event_id: bytes) -> bool:
        return event_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Event]:
        return iter(list(self._by_id.values()))

    def get_event(self, event_id: bytes) -> Optional[Event]:
        return self._by_id.get(event_id)

    def creators(self) -> List[bytes]:
        return list(self._chains)

    def chain_of(self, creator: bytes) -> List[Event]:
        """Events of ``creator`` indexed by height. Callers must not mutate it."""
        return self._chains.get(creator, [])

    def last_event_of(self, creator: bytes) -> Event:
        chain = self._chains.get(creator)
        if not chain:
            raise UnknownPeer(f'No events stored for creator {creator.hex()[:8]}')
        return chain[-1]

    def events_in_frame(self, frame: int) -> List[Event]:
        return [self._by_id[event_id] for event_id in sorted(self._by_frame.get(frame, ()))]

    def frames(self) -> List[int]:
        return sorted(frame for frame, ids in self._by_frame.items() if ids)

    @property
    def last_finalised_frame(self) -> Optional[int]:
        return self.finalised[-1].frame if self.finalised else None

    def is_finalised(self, event: Event) -> bool:
        last = self.last_finalised_frame
        return last is not None and event.frame is not None and event.frame <= last

    def missing_parents(self, event: Event) -> Set[bytes]:
        if event.is_leaf:
            return set()
        return {parent for parent in event.parent_ids() if parent not in self._by_id}

    def put_event(self, event: Event) -> PutOutcome:
        known = self._by_id.get(event.id)
        if known is not None:
            if known.hash_domain() != event.hash_domain():
                raise IntegrityFault(f'Event id {event.short_id} stored with different content')
            return PutOutcome(PutStatus.ALREADY_KNOWN)
        if event.frame is None:
            raise ProtocolViolation(f'Event {event.short_id} has no frame yet')
        if self.missing_parents(event):
            raise ProtocolViolation(f'Event {event.short_id} has unknown parents; buffer it instead')
        chain = self._chains.setdefault(event.creator, [])
        if event.height < len(chain):
            raise IntegrityFault(
                f'Creator {event.creator.hex()[:8]} already has event '
                f'{chain[event.height].short_id} at height {event.height}'
            )
        if event.height != len(chain):
            raise ProtocolViolation(
                f'Event {event.short_id} at height {event.height} skips '
                f'heights after {len(chain) - 1}'
            )
        chain.append(event)
        self._by_id[event.id] = event
        self._by_frame[event.frame].add(event.id)
        self._orphans.pop(event.id, None)
        if self.journal is not None and not event.is_leaf:
            self.journal.append(event)
        return PutOutcome(PutStatus.STORED, self._release(event.id))

    def _release(self, parent_id: bytes) -> Tuple[Event, ...]:
        ready = []
        for orphan_id in sorted(self._waiting.pop(parent_id, ())):
            orphan = self._orphans.get(orphan_id)
            if orphan is None:
                continue
            orphan.missing.discard(parent_id)
            if not orphan.missing:
                ready.append(self._orphans.pop(orphan_id).event)
        ready.sort(key=lambda event: (event.lamport_timestamp, event.id))
        return tuple(ready)

    def buffer_orphan(self, event: Event, missing: Iterable[bytes], now: int = 0) -> bool:
        if event.id in self._by_id:
            return False
        missing = {parent for parent in missing if parent not in self._by_id}
        if not missing:
            raise ProtocolViolation(f'Event {event.short_id} has all parents; insert it instead')
        if event.id in self._orphans:
            return True
        if len(self._orphans) >= self.orphan_capacity:
            raise OrphanBufferFull(f'Orphan buffer holds {len(self._orphans)} events')
        self._orphans[event.id] = _Orphan(event, missing, now)
        for parent in missing:
            self._waiting[parent].add(event.id)
        logger.debug('Buffered orphan %s waiting on %d parents', event.short_id, len(missing))
        return True

    @property
    def orphan_count(self) -> int:
        return len(self._orphans)

    def stale_orphans(self, now: int) -> List[Event]:
        """Orphans buffered for at least the timeout. Each is logged once."""
        stale = []
        for orphan in self._orphans.values():
            if now - orphan.buffered_at < self.orphan_timeout:
                continue
            if not orphan.flagged:
                orphan.flagged = True
                logger.warning(
                    'Orphan %s still missing %d parents after %d steps',
                    orphan.event.short_id, len(orphan.missing), now - orphan.buffered_at,
                )
            stale.append(orphan.event)
        return stale

    def strip_flag_table(self, event_id: bytes) -> None:
        event = self._by_id.get(event_id)
        if event is None:
            raise ProtocolViolation(f'Cannot strip unknown event {event_id.hex()[:8]}')
        if not self.is_finalised(event):
            raise ProtocolViolation(f'Event {event.short_id} is not in a finalised frame')
        event.flag_table = {}

    def record_final_order(self, order: FinalOrder) -> None:
        expected = 0 if self.last_finalised_frame is None else self.last_finalised_frame + 1
        if order.frame != expected:
            raise OrderingViolation(f'Expected to finalise frame {expected}, got {order.frame}')
        self.finalised.append(order)
