"""
Event DAG value types.

An event is the unit of gossip: it names its creator, its two parents
(self-parent and other-parent), a Lamport timestamp and a payload of
transactions. Only those fields are hashed and signed. Frame, root flag,
flag table and visibility heights are derived locally on insertion and
never leave the node.
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, NamedTuple, Optional, Set, Tuple

from consensus.exceptions import UnknownPeer

logger = logging.getLogger(__name__)

# EventId -> frame of a root the event can see
FlagTable = Dict[bytes, int]
# creator -> frame, derived from a FlagTable
CreatorFlagTable = Dict[bytes, int]


class InternalTag(IntEnum):
    """Reserved internal transaction kinds. Their effects are not specified yet."""

    MEMBERSHIP = 1
    KEY_ROTATION = 2
    FAILED_EVENTS = 3


@dataclass(frozen=True)
class InternalTransaction:
    tag: int
    body: bytes = b''


@dataclass(frozen=True)
class TransactionPayload:
    user_transactions: Tuple[bytes, ...] = ()
    internal_transactions: Tuple[InternalTransaction, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.user_transactions and not self.internal_transactions


@dataclass(eq=False)
class Event:
    creator: bytes
    height: int
    self_parent_id: bytes
    self_parent_hash: bytes
    other_parent_id: bytes
    other_parent_hash: bytes
    lamport_timestamp: int
    payload: TransactionPayload = field(default_factory=TransactionPayload)
    hash: bytes = b''
    signatures: List[Tuple[bytes, bytes]] = field(default_factory=list)
    # local annotations
    frame: Optional[int] = None
    is_root: bool = False
    flag_table: FlagTable = field(default_factory=dict)
    visible_heights: Dict[bytes, int] = field(default_factory=dict)

    @property
    def id(self) -> bytes:
        return self.hash

    @property
    def short_id(self) -> str:
        return self.hash.hex()[:8]

    @property
    def is_leaf(self) -> bool:
        return self.height == 0 and not any(self.self_parent_id)

    @property
    def signers(self) -> Set[bytes]:
        return {signer for signer, _ in self.signatures}

    def parent_ids(self) -> Tuple[bytes, bytes]:
        return self.self_parent_id, self.other_parent_id

    def hash_domain(self) -> tuple:
        return (
            self.creator,
            self.height,
            self.self_parent_id,
            self.self_parent_hash,
            self.other_parent_id,
            self.other_parent_hash,
            self.lamport_timestamp,
            self.payload,
        )

    def add_signature(self, signer: bytes, signature: bytes) -> bool:
        if signer in self.signers:
            return False
        self.signatures.append((signer, signature))
        return True

    def detached(self) -> 'Event':
        """Copy of the transmitted fields, without local annotations."""
        return Event(
            creator=self.creator,
            height=self.height,
            self_parent_id=self.self_parent_id,
            self_parent_hash=self.self_parent_hash,
            other_parent_id=self.other_parent_id,
            other_parent_hash=self.other_parent_hash,
            lamport_timestamp=self.lamport_timestamp,
            payload=self.payload,
            hash=self.hash,
            signatures=list(self.signatures),
        )

    def __repr__(self) -> str:
        return (
            f'Event({self.short_id} creator={self.creator.hex()[:8]} h={self.height} '
            f'ts={self.lamport_timestamp} frame={self.frame} root={self.is_root})'
        )


@dataclass(frozen=True)
class FinalOrder:
    """The agreed order of one finalised frame."""

    frame: int
    ordered_events: Tuple[bytes, ...]

    def export_lines(self, store) -> List[str]:
        lines = []
        for position, event_id in enumerate(self.ordered_events):
            event = store.get_event(event_id)
            lines.append(
                f'{self.frame}, {position}, {event_id.hex()}, '
                f'{event.creator.hex()}, {event.lamport_timestamp}'
            )
        return lines


class GossipEntry(NamedTuple):
    lamport_timestamp: int
    event_id: bytes


# creator -> newest known event of that creator
GossipList = Dict[bytes, GossipEntry]


def merge_gossip_lists(a: GossipList, b: GossipList) -> GossipList:
    """Per creator keep the entry with the larger timestamp.

    Equal timestamps with different ids mean a creator forked; the smaller
    id wins so the merge stays commutative.
    """
    merged = dict(a)
    for creator, entry in b.items():
        mine = merged.get(creator)
        if mine is None or entry.lamport_timestamp > mine.lamport_timestamp:
            merged[creator] = entry
        elif entry.lamport_timestamp == mine.lamport_timestamp and entry.event_id != mine.event_id:
            logger.warning(
                'Conflicting gossip entries for creator %s at timestamp %d',
                creator.hex()[:8], entry.lamport_timestamp,
            )
            if entry.event_id < mine.event_id:
                merged[creator] = entry
    return merged


def make_leaf_event(creator: bytes, peer_list, crypto, current_frame: int = 0,
                    initial_lamport: int = 0, key=None) -> Event:
    """Devise the leaf event of ``creator``.

    Every node derives the same leaf for a given peer, so leaves are never
    sent over the wire. The local node's own leaf carries its signature.
    """
    if creator not in peer_list:
        raise UnknownPeer(f'Cannot devise a leaf for unknown peer {creator.hex()[:8]}')
    zero = crypto.zero_digest
    leaf = Event(
        creator=creator,
        height=0,
        self_parent_id=zero,
        self_parent_hash=zero,
        other_parent_id=zero,
        other_parent_hash=zero,
        lamport_timestamp=initial_lamport,
    )
    leaf.hash = crypto.hash_event(leaf)
    leaf.frame = current_frame
    leaf.is_root = True
    leaf.flag_table = {leaf.id: current_frame}
    leaf.visible_heights = {creator: 0}
    if key is not None and key.peer_id == creator:
        leaf.add_signature(creator, crypto.sign_event(leaf, key))
    return leaf
