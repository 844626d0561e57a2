"""
Gossip synchronisation.

A node periodically picks a peer and sends it a sync request carrying its
gossip list (the newest event it knows per creator) and its Lamport
clock. The peer answers with every event the requester is missing, each
countersigned by the responder, plus its own gossip list and clock. The
requester verifies and inserts the bundle and, when there is something to
acknowledge, creates a new event whose other-parent is the responder's
newest event.
"""

import logging
import threading
from bisect import bisect_left
from dataclasses import dataclass, field
from operator import attrgetter
from typing import Dict, List, Optional

from django.core.exceptions import ImproperlyConfigured

from consensus import codec
from consensus.events import Event, GossipEntry, merge_gossip_lists
from consensus.exceptions import (
    ConsensusError,
    IntegrityFault,
    MalformedMessage,
    OrphanBufferFull,
    ProtocolViolation,
    TransportError,
    UnknownPeer,
)

logger = logging.getLogger(__name__)

MSG_SYNC_REQUEST = 0x01
MSG_SYNC_REPLY = 0x02
PROTOCOL_VERSION = 1


class PeerSelector:
    """Deterministic peer choice: step by n/2, n/4, ... 1 around the ring, then repeat."""

    mode = 'deterministic'

    def __init__(self, current: int, n: int):
        if n < 2:
            raise ImproperlyConfigured('Peer selection needs at least two peers')
        if not 0 <= current < n:
            raise ImproperlyConfigured(f'Peer index {current} outside a network of {n}')
        self.current = current
        self.n = n
        self.r = n >> 1

    def next_peer(self) -> int:
        chosen = (self.current + self.r) % self.n
        self.r = self.r >> 1 if self.r > 1 else self.n >> 1
        return chosen


def random_next_peer(n: int, current: int, most_recent: Optional[int], rng) -> int:
    """Uniform choice excluding ourselves and, when n > 2, the peer we just used."""
    excluded = {current}
    if n > 2 and most_recent is not None:
        excluded.add(most_recent)
    candidates = [index for index in range(n) if index not in excluded]
    return candidates[int(rng.integers(len(candidates)))]


class RandomPeerSelector:
    mode = 'random'

    def __init__(self, current: int, n: int, rng):
        if n < 2:
            raise ImproperlyConfigured('Peer selection needs at least two peers')
        self.current = current
        self.n = n
        self.rng = rng
        self.most_recent: Optional[int] = None
        self.r = 0

    def next_peer(self) -> int:
        self.most_recent = random_next_peer(self.n, self.current, self.most_recent, self.rng)
        return self.most_recent


def _read_header(reader: codec.Reader, expected_type: int) -> None:
    message_type = reader.u8()
    if message_type != expected_type:
        raise MalformedMessage(f'Expected message type {expected_type}, got {message_type}')
    version = reader.u8()
    if version != PROTOCOL_VERSION:
        raise MalformedMessage(f'Unsupported protocol version {version}')


@dataclass
class SyncRequest:
    sender: bytes
    gossip_list: Dict[bytes, GossipEntry]
    lamport_time: int
    suite: str = ''

    def to_bytes(self) -> bytes:
        writer = codec.Writer().u8(MSG_SYNC_REQUEST).u8(PROTOCOL_VERSION)
        writer.blob(self.suite.encode('ascii'))
        writer.blob(self.sender)
        codec.write_gossip_list(writer, self.gossip_list)
        writer.u64(self.lamport_time)
        return writer.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'SyncRequest':
        reader = codec.Reader(data)
        _read_header(reader, MSG_SYNC_REQUEST)
        try:
            suite = reader.blob().decode('ascii')
        except UnicodeDecodeError as exc:
            raise MalformedMessage('Suite name is not ASCII') from exc
        sender = reader.blob()
        gossip_list = codec.read_gossip_list(reader)
        lamport_time = reader.u64()
        reader.expect_end()
        return cls(sender, gossip_list, lamport_time, suite)


@dataclass
class SyncReply:
    sender: bytes
    gossip_list: Dict[bytes, GossipEntry]
    lamport_time: int
    bundle: List[Event] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        writer = codec.Writer().u8(MSG_SYNC_REPLY).u8(PROTOCOL_VERSION)
        writer.blob(self.sender)
        codec.write_gossip_list(writer, self.gossip_list)
        writer.u64(self.lamport_time)
        writer.u32(len(self.bundle))
        for event in self.bundle:
            codec.write_event_record(writer, event)
        return writer.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'SyncReply':
        reader = codec.Reader(data)
        _read_header(reader, MSG_SYNC_REPLY)
        sender = reader.blob()
        gossip_list = codec.read_gossip_list(reader)
        lamport_time = reader.u64()
        bundle = [codec.read_event_record(reader) for _ in range(reader.count())]
        reader.expect_end()
        return cls(sender, gossip_list, lamport_time, bundle)


def select_bundle(store, remote_gossip: Dict[bytes, GossipEntry]) -> List[Event]:
    """Events the requester lacks, parents before children.

    For each creator, take every event at or after the requester's
    coordinate except the coordinate itself; for creators the requester
    has no coordinate for, take every non-leaf event.
    """
    bundle = []
    for creator in store.creators():
        chain = store.chain_of(creator)
        coordinate = remote_gossip.get(creator)
        start = 1
        if coordinate is not None:
            start = max(start, bisect_left(
                chain, coordinate.lamport_timestamp, key=attrgetter('lamport_timestamp')
            ))
        for event in chain[start:]:
            if coordinate is None or event.id != coordinate.event_id:
                bundle.append(event)
    bundle.sort(key=lambda event: (event.lamport_timestamp, event.id))
    return bundle


class GossipNode:
    """
    Runs both sync procedures for one engine.

    Procedure A (``heartbeat_step``) chooses a peer and synchronises with it
    through ``transport``; Procedure B (``handle_request_bytes``) answers
    incoming requests. ``clock`` is the notion of "now" used to age orphans.
    """

    def __init__(self, engine, transport=None, selector=None):
        self.engine = engine
        self.transport = transport
        state = engine.state
        self.selector = selector or PeerSelector(state.peer_list.index_of(state.me.id), state.peer_list.n)
        self.clock = 0

    @property
    def peer_id(self) -> bytes:
        return self.engine.state.me.id

    def select_peer(self):
        index = self.selector.next_peer()
        self.engine.state.peer_selection_round = self.selector.r
        return self.engine.state.peer_list.peers[index]

    def build_request(self) -> SyncRequest:
        engine = self.engine
        with engine.lock:
            return SyncRequest(
                sender=self.peer_id,
                gossip_list=dict(engine.state.gossip_list),
                lamport_time=engine.state.lamport,
                suite=engine.crypto.suite.name,
            )

    def heartbeat_step(self) -> Optional[Event]:
        peer = self.select_peer()
        try:
            return self.synchronisation_procedure(peer.id)
        except TransportError as exc:
            logger.info('Sync with %s failed: %s', peer.short_id, exc)
            return None

    def synchronisation_procedure(self, peer_id: bytes) -> Optional[Event]:
        if peer_id == self.peer_id:
            raise ProtocolViolation('A node cannot synchronise with itself')
        if self.transport is None:
            raise TransportError('No transport configured')
        peer = self.engine.state.peer_list.get(peer_id)
        reply_bytes = self.transport.request(peer, self.build_request().to_bytes())
        try:
            reply = SyncReply.from_bytes(reply_bytes)
        except MalformedMessage as exc:
            raise TransportError(f'Unreadable reply from {peer.short_id}: {exc}') from exc
        return self.apply_reply(peer_id, reply)

    def apply_reply(self, peer_id: bytes, reply: SyncReply) -> Optional[Event]:
        """
        Absorb a sync reply and possibly create a new event.

        Args:
            peer_id (bytes): the peer the request was sent to
            reply (SyncReply): its decoded answer

        Returns:
            Optional[Event]: the event created in response, if any
        """
        engine = self.engine
        state = engine.state
        if reply.sender != peer_id:
            raise TransportError(f'Reply from {reply.sender.hex()[:8]} to a request for {peer_id.hex()[:8]}')
        with engine.lock:
            for event in reply.bundle:
                if event.id in engine.store:
                    continue
                report = engine.crypto.verify_event(event, state.peer_list)
                if not report.accepted:
                    logger.warning('Rejected event %s from %s: %s', event.short_id, peer_id.hex()[:8], report.reason)
                    continue
                for relayer in report.invalid_relayers:
                    logger.warning('Invalid relay signature by %s on %s', relayer.hex()[:8], event.short_id)
                try:
                    engine.receive_event(event, now=self.clock)
                except OrphanBufferFull as exc:
                    logger.warning('Stopped applying reply from %s: %s', peer_id.hex()[:8], exc)
                    break
                except (ProtocolViolation, UnknownPeer) as exc:
                    logger.warning('Rejected event %s: %s', event.short_id, exc)
            known = {
                creator: entry for creator, entry in reply.gossip_list.items()
                if entry.event_id in engine.store
            }
            state.gossip_list = merge_gossip_lists(state.gossip_list, known)
            state.lamport = max(state.lamport, reply.lamport_time)
            if engine.should_create_event(peer_id):
                return engine.create_event(peer_id)
            return None

    def synchronisation_reply_procedure(self, request: SyncRequest) -> SyncReply:
        engine = self.engine
        state = engine.state
        with engine.lock:
            if request.sender not in state.peer_list or request.sender == self.peer_id:
                raise UnknownPeer(f'Sync request from unknown peer {request.sender.hex()[:8]}')
            if request.suite and request.suite != engine.crypto.suite.name:
                raise MalformedMessage(
                    f'Peer uses crypto suite {request.suite}, this node uses {engine.crypto.suite.name}'
                )
            bundle = select_bundle(engine.store, request.gossip_list)
            for event in bundle:
                if self.peer_id not in event.signers:
                    event.add_signature(self.peer_id, engine.crypto.sign_event(event, state.key))
            reply = SyncReply(self.peer_id, dict(state.gossip_list), state.lamport, bundle)
            state.lamport = max(state.lamport, request.lamport_time)
            return reply

    def handle_request_bytes(self, data: bytes) -> bytes:
        with self.engine.lock:
            return self.synchronisation_reply_procedure(SyncRequest.from_bytes(data)).to_bytes()

    def serve_loop(self, transport=None) -> None:
        """Answer requests until the transport is closed."""
        transport = transport or self.transport
        while True:
            incoming = transport.receive()
            if incoming is None:
                return
            data, respond = incoming
            try:
                respond(self.handle_request_bytes(data))
            except (MalformedMessage, UnknownPeer) as exc:
                logger.warning('Refused sync request: %s', exc)
                respond(None)
            except ConsensusError:
                logger.exception('Sync request failed')
                respond(None)

    def run_procedure_a(self, stop: threading.Event, heartbeat_seconds: float,
                        iterations: Optional[int] = None) -> int:
        """Heartbeat loop for threaded and networked deployments. Returns iterations run."""
        done = 0
        while not stop.is_set() and (iterations is None or done < iterations):
            try:
                self.heartbeat_step()
            except IntegrityFault:
                logger.exception('Integrity fault; stopping node %s', self.engine.state.me.short_id)
                raise
            except ConsensusError as exc:
                logger.warning('Heartbeat failed: %s', exc)
            done += 1
            if heartbeat_seconds:
                stop.wait(heartbeat_seconds)
        return done
