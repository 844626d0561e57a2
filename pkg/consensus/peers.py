"""Peer identities, the network peer list and Lamport clock initialisation."""

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from django.core.exceptions import ImproperlyConfigured

from consensus.exceptions import UnknownPeer

DEFAULT_LAMPORT_BYTE_INDEX = 13


@dataclass(frozen=True)
class PeerInfo:
    """A network member. The id is the raw Ed25519 public key."""

    id: bytes
    public_key: bytes
    net_address: str = ''

    @property
    def short_id(self) -> str:
        return self.id.hex()[:8]


class PeerList:
    """The fixed membership of the network, ordered by public key.

    Every node builds the same list, so indices into it are shared and
    the deterministic peer selector can work on positions alone.
    """

    def __init__(self, peers: Iterable[PeerInfo]):
        ordered = sorted(peers, key=lambda peer: peer.public_key)
        ids = [peer.id for peer in ordered]
        if len(ordered) < 2:
            raise ImproperlyConfigured('A network needs at least two peers')
        if len(set(ids)) != len(ids):
            raise ImproperlyConfigured('Peer ids must be unique')
        self.peers = tuple(ordered)
        self._by_id = {peer.id: peer for peer in ordered}
        self._index = {peer.id: index for index, peer in enumerate(ordered)}

    @classmethod
    def from_keys(cls, keys: Sequence, addresses: Optional[Sequence[str]] = None) -> 'PeerList':
        """Build a peer list from key handles, pairing each with its address."""
        if addresses is not None and len(addresses) != len(keys):
            raise ImproperlyConfigured(
                f'Expected {len(keys)} peer addresses, got {len(addresses)}'
            )
        peers = []
        for position, key in enumerate(keys):
            address = addresses[position] if addresses is not None else ''
            peers.append(PeerInfo(id=key.peer_id, public_key=key.public_key, net_address=address))
        return cls(peers)

    @property
    def n(self) -> int:
        return len(self.peers)

    def __len__(self) -> int:
        return len(self.peers)

    def __iter__(self) -> Iterator[PeerInfo]:
        return iter(self.peers)

    def __contains__(self, peer_id: bytes) -> bool:
        return peer_id in self._by_id

    def get(self, peer_id: bytes) -> PeerInfo:
        try:
            return self._by_id[peer_id]
        except KeyError:
            raise UnknownPeer(f'Peer {peer_id.hex()[:8]} is not in the peer list') from None

    def index_of(self, peer_id: bytes) -> int:
        self.get(peer_id)
        return self._index[peer_id]

    def ids(self) -> List[bytes]:
        return [peer.id for peer in self.peers]

    def digest(self) -> bytes:
        """Fingerprint of the membership, written into journal headers."""
        hasher = hashlib.sha256(struct.pack('>I', self.n))
        for peer in self.peers:
            hasher.update(struct.pack('>I', len(peer.id)) + peer.id)
            hasher.update(struct.pack('>I', len(peer.public_key)) + peer.public_key)
        return hasher.digest()

    def addresses(self) -> Dict[bytes, str]:
        return {peer.id: peer.net_address for peer in self.peers}


class LamportInit(str, Enum):
    ALL_ZERO = 'all_zero'
    ID_BYTE = 'id_byte'


def lamport_init(strategy, me: bytes, byte_index: int = DEFAULT_LAMPORT_BYTE_INDEX) -> int:
    """Initial Lamport clock value for peer ``me``.

    ``id_byte`` seeds the clock with one byte of the peer id so that
    concurrent first events rarely share a timestamp.
    """
    try:
        strategy = LamportInit(strategy)
    except ValueError:
        raise ImproperlyConfigured(f'Unknown Lamport initialisation strategy: {strategy!r}') from None
    if strategy is LamportInit.ALL_ZERO:
        return 0
    if not 0 <= byte_index < len(me):
        raise ImproperlyConfigured(
            f'Lamport byte index {byte_index} is outside a {len(me)}-byte peer id'
        )
    return me[byte_index]
