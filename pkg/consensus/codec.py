"""
Canonical byte layouts.

All integers are big-endian. Byte strings are prefixed with a u32 length,
sequences with a u32 count. The hash-domain encoding of an event is what
gets hashed and signed; the event record adds the claimed hash and the
signature list and is what travels on the wire and into the journal.
"""

import struct
from typing import Dict, List, Tuple

from consensus.events import Event, GossipEntry, InternalTransaction, TransactionPayload
from consensus.exceptions import MalformedMessage

_U8 = struct.Struct('>B')
_U16 = struct.Struct('>H')
_U32 = struct.Struct('>I')
_U64 = struct.Struct('>Q')

JOURNAL_MAGIC = b'ACAJ'
JOURNAL_VERSION = 1


class Writer:
    def __init__(self):
        self._chunks: List[bytes] = []

    def u8(self, value: int) -> 'Writer':
        self._chunks.append(_U8.pack(value))
        return self

    def u16(self, value: int) -> 'Writer':
        self._chunks.append(_U16.pack(value))
        return self

    def u32(self, value: int) -> 'Writer':
        self._chunks.append(_U32.pack(value))
        return self

    def u64(self, value: int) -> 'Writer':
        self._chunks.append(_U64.pack(value))
        return self

    def blob(self, data: bytes) -> 'Writer':
        self.u32(len(data))
        self._chunks.append(bytes(data))
        return self

    def raw(self, data: bytes) -> 'Writer':
        self._chunks.append(bytes(data))
        return self

    def getvalue(self) -> bytes:
        return b''.join(self._chunks)


class Reader:
    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._offset = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._offset

    def _take(self, size: int) -> bytes:
        if size > self.remaining:
            raise MalformedMessage(
                f'Truncated input: wanted {size} bytes at offset {self._offset}, '
                f'{self.remaining} left'
            )
        chunk = self._data[self._offset:self._offset + size]
        self._offset += size
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def blob(self) -> bytes:
        return self._take(self.u32())

    def raw(self, size: int) -> bytes:
        return self._take(size)

    def count(self) -> int:
        count = self.u32()
        # every element occupies at least four bytes
        if count * 4 > self.remaining:
            raise MalformedMessage(f'Sequence count {count} exceeds the remaining input')
        return count

    def expect_end(self) -> None:
        if self.remaining:
            raise MalformedMessage(f'{self.remaining} trailing bytes after message')


def write_hash_domain(writer: Writer, event: Event) -> None:
    writer.blob(event.creator)
    writer.u64(event.height)
    writer.blob(event.self_parent_id)
    writer.blob(event.self_parent_hash)
    writer.blob(event.other_parent_id)
    writer.blob(event.other_parent_hash)
    writer.u64(event.lamport_timestamp)
    payload = event.payload
    writer.u32(len(payload.user_transactions))
    for transaction in payload.user_transactions:
        writer.blob(transaction)
    writer.u32(len(payload.internal_transactions))
    for internal in payload.internal_transactions:
        writer.u16(internal.tag)
        writer.blob(internal.body)


def read_hash_domain(reader: Reader) -> Event:
    creator = reader.blob()
    height = reader.u64()
    self_parent_id = reader.blob()
    self_parent_hash = reader.blob()
    other_parent_id = reader.blob()
    other_parent_hash = reader.blob()
    lamport_timestamp = reader.u64()
    user = tuple(reader.blob() for _ in range(reader.count()))
    internal = []
    for _ in range(reader.count()):
        tag = reader.u16()
        internal.append(InternalTransaction(tag=tag, body=reader.blob()))
    return Event(
        creator=creator,
        height=height,
        self_parent_id=self_parent_id,
        self_parent_hash=self_parent_hash,
        other_parent_id=other_parent_id,
        other_parent_hash=other_parent_hash,
        lamport_timestamp=lamport_timestamp,
        payload=TransactionPayload(user, tuple(internal)),
    )


def encode_hash_domain(event: Event) -> bytes:
    writer = Writer()
    write_hash_domain(writer, event)
    return writer.getvalue()


def decode_hash_domain(data: bytes) -> Event:
    reader = Reader(data)
    event = read_hash_domain(reader)
    reader.expect_end()
    return event


def write_event_record(writer: Writer, event: Event) -> None:
    writer.blob(encode_hash_domain(event))
    writer.blob(event.hash)
    writer.u32(len(event.signatures))
    for signer, signature in event.signatures:
        writer.blob(signer)
        writer.blob(signature)


def read_event_record(reader: Reader) -> Event:
    event = decode_hash_domain(reader.blob())
    event.hash = reader.blob()
    for _ in range(reader.count()):
        signer = reader.blob()
        event.signatures.append((signer, reader.blob()))
    return event


def encode_event_record(event: Event) -> bytes:
    writer = Writer()
    write_event_record(writer, event)
    return writer.getvalue()


def decode_event_record(data: bytes) -> Event:
    reader = Reader(data)
    event = read_event_record(reader)
    reader.expect_end()
    return event


def write_gossip_list(writer: Writer, gossip_list: Dict[bytes, GossipEntry]) -> None:
    writer.u32(len(gossip_list))
    for creator in sorted(gossip_list):
        entry = gossip_list[creator]
        writer.blob(creator)
        writer.u64(entry.lamport_timestamp)
        writer.blob(entry.event_id)


def read_gossip_list(reader: Reader) -> Dict[bytes, GossipEntry]:
    gossip_list = {}
    for _ in range(reader.count()):
        creator = reader.blob()
        timestamp = reader.u64()
        gossip_list[creator] = GossipEntry(timestamp, reader.blob())
    return gossip_list


def journal_header(suite_name: str, peer_list_digest: bytes) -> bytes:
    return (
        Writer()
        .raw(JOURNAL_MAGIC)
        .u8(JOURNAL_VERSION)
        .blob(suite_name.encode('ascii'))
        .blob(peer_list_digest)
        .getvalue()
    )


def journal_record(event: Event) -> bytes:
    return Writer().blob(encode_event_record(event)).getvalue()


def read_journal(data: bytes) -> Tuple[str, bytes, List[Event]]:
    """Parse a journal file into (suite name, peer list digest, events)."""
    reader = Reader(data)
    if reader.raw(len(JOURNAL_MAGIC)) != JOURNAL_MAGIC:
        raise MalformedMessage('Not an event journal')
    version = reader.u8()
    if version != JOURNAL_VERSION:
        raise MalformedMessage(f'Unsupported journal version {version}')
    try:
        suite_name = reader.blob().decode('ascii')
    except UnicodeDecodeError as exc:
        raise MalformedMessage('Journal suite name is not ASCII') from exc
    digest = reader.blob()
    events = []
    while reader.remaining:
        events.append(decode_event_record(reader.blob()))
    return suite_name, digest, events
