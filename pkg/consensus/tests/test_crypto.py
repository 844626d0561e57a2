import pytest
from django.core.exceptions import ImproperlyConfigured

from consensus.crypto import CryptoService, CryptoSuite, KeyHandle, network_identities
from consensus.exceptions import SigningError
from consensus.tests.helpers import build_engines, ordered_keys


@pytest.fixture
def signed_event():
    engines = build_engines(3, network_seed='crypto')
    event = engines[0].create_event(engines[1].state.me.id).detached()
    return event, engines


def test_signature_verifies_and_tampering_does_not(crypto):
    key = KeyHandle.from_seed(b'\x01' * 32)
    signature = crypto.sign(b'payload', key)
    assert crypto.verify_signature(key.public_key, signature, b'payload')
    assert not crypto.verify_signature(key.public_key, signature, b'payloaD')
    assert not crypto.verify_signature(key.public_key, b'\x00' * 64, b'payload')


def test_identities_are_reproducible():
    first = [key.public_key for key in network_identities('seed', 4)]
    again = [key.public_key for key in network_identities('seed', 4)]
    assert first == again
    assert len(set(first)) == 4


def test_created_event_is_accepted(signed_event, crypto):
    event, engines = signed_event
    report = crypto.verify_event(event, engines[0].state.peer_list)
    assert report.accepted
    assert report.reason == 'ok'


def test_changed_payload_fails_the_hash_check(signed_event, crypto):
    event, engines = signed_event
    event.lamport_timestamp += 1
    report = crypto.verify_event(event, engines[0].state.peer_list)
    assert not report.hash_ok
    assert report.reason == 'hash mismatch'


def test_missing_creator_signature_is_rejected(signed_event, crypto):
    event, engines = signed_event
    event.signatures = []
    report = crypto.verify_event(event, engines[0].state.peer_list)
    assert report.hash_ok
    assert not report.accepted


def test_bad_relayer_signature_is_reported_without_rejection(signed_event, crypto):
    event, engines = signed_event
    relayer = engines[2].state.me.id
    event.add_signature(relayer, b'\x00' * 64)
    report = crypto.verify_event(event, engines[0].state.peer_list)
    assert report.accepted
    assert report.invalid_relayers == [relayer]


def test_unknown_signers_are_listed(signed_event, crypto):
    event, engines = signed_event
    event.add_signature(b'\xee' * 32, b'\x00' * 64)
    report = crypto.verify_event(event, engines[0].state.peer_list)
    assert report.accepted
    assert report.unknown_signers == [b'\xee' * 32]


def test_signing_without_a_key_fails(crypto):
    with pytest.raises(SigningError):
        crypto.sign(b'data', None)


def test_signing_an_unhashed_event_fails(signed_event, crypto):
    event, engines = signed_event
    event.hash = b''
    keys, _ = ordered_keys('crypto', 3)
    with pytest.raises(SigningError):
        crypto.sign_event(event, keys[0])


def test_unsupported_suites_are_configuration_errors():
    with pytest.raises(ImproperlyConfigured):
        CryptoSuite(hash_name='md5')
    with pytest.raises(ImproperlyConfigured):
        CryptoSuite(signature_name='rsa')


def test_alternative_hash_changes_digests(signed_event):
    event, _ = signed_event
    sha = CryptoService(CryptoSuite('sha256'))
    blake = CryptoService(CryptoSuite('blake2b'))
    assert sha.hash_event(event) != blake.hash_event(event)
    assert len(blake.hash_event(event)) == 32
