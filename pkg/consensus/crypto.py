"""
Hashing and signing for events.

The suite is configurable by name (``ACA_HASH`` / ``ACA_SIGNATURE``) and is
announced in every sync request so mismatched nodes refuse each other.
Signatures cover the event hash, never the encoding itself.
"""

import hashlib
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519
from django.core.exceptions import ImproperlyConfigured

from consensus import codec
from consensus.events import Event
from consensus.exceptions import SigningError

logger = logging.getLogger(__name__)

HASH_FUNCTIONS: Dict[str, Callable] = {
    'sha256': hashlib.sha256,
    'sha3_256': hashlib.sha3_256,
    'blake2b': lambda data=b'': hashlib.blake2b(data, digest_size=32),
}
SIGNATURE_SCHEMES = ('ed25519',)


@dataclass(frozen=True)
class CryptoSuite:
    hash_name: str = 'sha256'
    signature_name: str = 'ed25519'

    def __post_init__(self):
        if self.hash_name not in HASH_FUNCTIONS:
            raise ImproperlyConfigured(f'Unsupported hash function: {self.hash_name!r}')
        if self.signature_name not in SIGNATURE_SCHEMES:
            raise ImproperlyConfigured(f'Unsupported signature scheme: {self.signature_name!r}')

    @classmethod
    def from_settings(cls) -> 'CryptoSuite':
        from django.conf import settings
        return cls(settings.ACA_HASH, settings.ACA_SIGNATURE)

    @property
    def name(self) -> str:
        return f'{self.hash_name}+{self.signature_name}'

    @property
    def digest_size(self) -> int:
        return HASH_FUNCTIONS[self.hash_name]().digest_size


class KeyHandle:
    """Owns a private key. Signing is serialised so one handle can be shared by threads."""

    def __init__(self, private_key: ed25519.Ed25519PrivateKey):
        self._private_key = private_key
        self._lock = threading.Lock()
        self.public_key = private_key.public_key().public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )

    @classmethod
    def generate(cls) -> 'KeyHandle':
        return cls(ed25519.Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> 'KeyHandle':
        if len(seed) != 32:
            raise ImproperlyConfigured('An Ed25519 seed must be 32 bytes')
        return cls(ed25519.Ed25519PrivateKey.from_private_bytes(seed))

    @property
    def peer_id(self) -> bytes:
        return self.public_key

    def sign(self, data: bytes) -> bytes:
        with self._lock:
            return self._private_key.sign(data)


def network_identities(network_seed, size: int) -> List[KeyHandle]:
    """Derive ``size`` key handles from a shared network seed.

    Simulations and local test networks use this so every process can
    rebuild the same peer list without exchanging keys.
    """
    if size < 2:
        raise ImproperlyConfigured('A network needs at least two peers')
    return [
        KeyHandle.from_seed(hashlib.sha256(f'aca-identity:{network_seed}:{index}'.encode()).digest())
        for index in range(size)
    ]


@dataclass
class VerificationReport:
    hash_ok: bool
    creator_signature_ok: bool
    relayer_signatures: Dict[bytes, bool] = field(default_factory=dict)
    unknown_signers: List[bytes] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.hash_ok and self.creator_signature_ok

    @property
    def invalid_relayers(self) -> List[bytes]:
        return [signer for signer, ok in self.relayer_signatures.items() if not ok]

    @property
    def reason(self) -> str:
        if not self.hash_ok:
            return 'hash mismatch'
        if not self.creator_signature_ok:
            return 'missing or invalid creator signature'
        return 'ok'


class CryptoService:
    """Hash, sign and verify events with one configured suite."""

    def __init__(self, suite: Optional[CryptoSuite] = None):
        self.suite = suite or CryptoSuite()
        self._hash_function = HASH_FUNCTIONS[self.suite.hash_name]
        self._public_keys: Dict[bytes, ed25519.Ed25519PublicKey] = {}

    @property
    def zero_digest(self) -> bytes:
        return bytes(self.suite.digest_size)

    def hash_bytes(self, data: bytes) -> bytes:
        return self._hash_function(data).digest()

    def canonical_encode(self, event: Event) -> bytes:
        return codec.encode_hash_domain(event)

    def hash_event(self, event: Event) -> bytes:
        return self.hash_bytes(codec.encode_hash_domain(event))

    def sign(self, data: bytes, key: Optional[KeyHandle]) -> bytes:
        if key is None:
            raise SigningError('No private key available')
        try:
            return key.sign(data)
        except Exception as exc:
            raise SigningError(f'Signing failed: {exc}') from exc

    def sign_event(self, event: Event, key: Optional[KeyHandle]) -> bytes:
        if not event.hash:
            raise SigningError('Event must be hashed before signing')
        return self.sign(event.hash, key)

    def _public_key(self, public_key: bytes) -> ed25519.Ed25519PublicKey:
        loaded = self._public_keys.get(public_key)
        if loaded is None:
            loaded = ed25519.Ed25519PublicKey.from_public_bytes(public_key)
            self._public_keys[public_key] = loaded
        return loaded

    def verify_signature(self, public_key: bytes, signature: bytes, data: bytes) -> bool:
        try:
            self._public_key(public_key).verify(signature, data)
        except (InvalidSignature, ValueError):
            return False
        return True

    def verify_event(self, event: Event, peer_list) -> VerificationReport:
        """
        Check a received event's hash and every signature attached to it.

        Args:
            event (Event): event decoded from the wire, carrying its claimed hash
            peer_list (PeerList): membership used to resolve signer public keys

        Returns:
            VerificationReport: the event is acceptable when the recomputed hash
                matches and the creator's signature verifies. Relayer results
                are reported separately and never cause rejection.
        """
        report = VerificationReport(
            hash_ok=self.hash_event(event) == event.hash,
            creator_signature_ok=False,
        )
        seen = set()
        for signer, signature in event.signatures:
            if signer in seen:
                continue
            seen.add(signer)
            if signer not in peer_list:
                report.unknown_signers.append(signer)
                continue
            ok = self.verify_signature(peer_list.get(signer).public_key, signature, event.hash)
            if signer == event.creator:
                report.creator_signature_ok = ok
            else:
                report.relayer_signatures[signer] = ok
        return report
