import hashlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consensus import codec
from consensus.events import Event, GossipEntry, InternalTransaction, TransactionPayload
from consensus.exceptions import MalformedMessage

GOLDEN = Path(__file__).parent / 'fixtures' / 'golden_hashes.txt'


def golden_vectors():
    for line in GOLDEN.read_text().splitlines():
        if line.strip():
            encoding, digest = line.split()
            yield bytes.fromhex(encoding), bytes.fromhex(digest)


def vector_two_event():
    return Event(
        creator=bytes(range(32)),
        height=1,
        self_parent_id=b'\x11' * 32,
        self_parent_hash=b'\x11' * 32,
        other_parent_id=b'\x22' * 32,
        other_parent_hash=b'\x22' * 32,
        lamport_timestamp=7,
        payload=TransactionPayload((b'hello',), (InternalTransaction(1, b'x'),)),
    )


@pytest.mark.parametrize('encoding,digest', list(golden_vectors()))
def test_golden_encodings_reproduce(encoding, digest, crypto):
    event = codec.decode_hash_domain(encoding)
    assert codec.encode_hash_domain(event) == encoding
    assert crypto.hash_event(event) == digest


def test_constructed_event_matches_golden_vector(crypto):
    encoding, digest = list(golden_vectors())[1]
    event = vector_two_event()
    assert codec.encode_hash_domain(event) == encoding
    assert crypto.hash_event(event) == digest == hashlib.sha256(encoding).digest()


def test_local_annotations_do_not_affect_the_hash(crypto):
    plain = vector_two_event()
    annotated = vector_two_event()
    annotated.frame = 9
    annotated.is_root = True
    annotated.flag_table = {b'\x01' * 32: 4}
    annotated.signatures.append((b'\x02' * 32, b'sig'))
    assert crypto.hash_event(plain) == crypto.hash_event(annotated)


def test_transaction_order_changes_the_hash(crypto):
    first = vector_two_event()
    second = vector_two_event()
    first.payload = TransactionPayload((b'a', b'b'))
    second.payload = TransactionPayload((b'b', b'a'))
    assert crypto.hash_event(first) != crypto.hash_event(second)


def test_truncated_input_is_malformed():
    encoding, _ = list(golden_vectors())[1]
    with pytest.raises(MalformedMessage):
        codec.decode_hash_domain(encoding[:-3])


def test_trailing_bytes_are_malformed():
    encoding, _ = list(golden_vectors())[0]
    with pytest.raises(MalformedMessage):
        codec.decode_hash_domain(encoding + b'\x00')


def test_absurd_sequence_count_is_malformed():
    data = codec.Writer().u32(1_000_000).getvalue()
    with pytest.raises(MalformedMessage):
        codec.Reader(data).count()


def test_event_record_carries_hash_and_signatures(crypto):
    event = vector_two_event()
    event.hash = crypto.hash_event(event)
    event.signatures = [(b'\x03' * 32, b'\x04' * 64), (b'\x05' * 32, b'\x06' * 64)]
    decoded = codec.decode_event_record(codec.encode_event_record(event))
    assert decoded.hash == event.hash
    assert decoded.signatures == event.signatures
    assert decoded.hash_domain() == event.hash_domain()
    assert decoded.frame is None


def test_gossip_list_is_written_in_creator_order():
    gossip = {b'\x02': GossipEntry(5, b'b'), b'\x01': GossipEntry(3, b'a')}
    writer = codec.Writer()
    codec.write_gossip_list(writer, gossip)
    reader = codec.Reader(writer.getvalue())
    assert list(codec.read_gossip_list(reader).items()) == sorted(gossip.items())
    reader.expect_end()


def test_journal_rejects_foreign_files():
    with pytest.raises(MalformedMessage):
        codec.read_journal(b'NOPE' + bytes(12))


@settings(max_examples=50, deadline=None)
@given(
    height=st.integers(min_value=0, max_value=2**64 - 1),
    lamport=st.integers(min_value=0, max_value=2**64 - 1),
    user=st.lists(st.binary(max_size=16), max_size=4),
    internal=st.lists(st.tuples(st.integers(min_value=0, max_value=0xFFFF), st.binary(max_size=8)), max_size=3),
)
def test_record_decoding_inverts_encoding(height, lamport, user, internal):
    event = Event(
        creator=b'\x07' * 32,
        height=height,
        self_parent_id=b'\x01' * 32,
        self_parent_hash=b'\x01' * 32,
        other_parent_id=b'\x02' * 32,
        other_parent_hash=b'\x02' * 32,
        lamport_timestamp=lamport,
        payload=TransactionPayload(tuple(user), tuple(InternalTransaction(t, b) for t, b in internal)),
        hash=b'\x09' * 32,
    )
    assert codec.decode_event_record(codec.encode_event_record(event)).hash_domain() == event.hash_domain()


def random_event(rng, lamport):
    self_parent, other_parent = rng.bytes(32), rng.bytes(32)
    user = tuple(rng.bytes(int(rng.integers(0, 17))) for _ in range(int(rng.integers(0, 4))))
    internal = tuple(
        InternalTransaction(int(rng.integers(0, 0x10000)), rng.bytes(int(rng.integers(0, 9))))
        for _ in range(int(rng.integers(0, 3)))
    )
    return Event(
        creator=rng.bytes(32),
        height=int(rng.integers(1, 2**62)),
        self_parent_id=self_parent,
        self_parent_hash=self_parent,
        other_parent_id=other_parent,
        other_parent_hash=other_parent,
        lamport_timestamp=lamport,
        payload=TransactionPayload(user, internal),
    )


@pytest.mark.slow
def test_random_events_survive_encoding_bit_exactly(crypto):
    rng = np.random.default_rng(77)
    for lamport in range(10_000):
        event = random_event(rng, lamport)
        encoding = codec.encode_hash_domain(event)
        decoded = codec.decode_hash_domain(encoding)
        assert codec.encode_hash_domain(decoded) == encoding
        assert crypto.hash_event(decoded) == crypto.hash_event(event)


@pytest.mark.slow
def test_event_hashes_do_not_collide(crypto):
    rng = np.random.default_rng(78)
    digests = {crypto.hash_event(random_event(rng, lamport)) for lamport in range(100_000)}
    assert len(digests) == 100_000
