"""The process-wide gossip node used by the HTTP deployment."""

import logging
import threading
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from consensus.conf import EngineConfig
from consensus.crypto import CryptoService, CryptoSuite, network_identities
from consensus.engine import ConsensusEngine
from consensus.gossip import GossipNode
from consensus.ledger import LedgerSink, LedgerState, load_genesis
from consensus.peers import PeerList
from consensus.store import EventJournal, EventStore
from consensus.transport import HttpTransport

logger = logging.getLogger(__name__)

_node: Optional[GossipNode] = None
_ledger: Optional[LedgerState] = None
_lock = threading.Lock()


def build_local_node() -> GossipNode:
    """Assemble this process's node from the ACA_* settings."""
    global _ledger
    seed, size, index = settings.ACA_NETWORK_SEED, settings.ACA_NETWORK_SIZE, settings.ACA_NODE_INDEX
    if seed is None:
        raise ImproperlyConfigured('ACA_NETWORK_SEED must be set to run a node')
    if not 0 <= index < size:
        raise ImproperlyConfigured(f'ACA_NODE_INDEX {index} is outside a network of {size}')
    # index and addresses follow key derivation order, not the sorted peer list
    keys = network_identities(seed, size)
    peer_list = PeerList.from_keys(keys, settings.ACA_PEER_ADDRESSES or None)
    crypto = CryptoService(CryptoSuite.from_settings())
    config = EngineConfig.from_settings()
    store = EventStore(config.orphan_capacity, config.orphan_timeout)
    engine = ConsensusEngine.bootstrap(keys[index], peer_list, crypto, config, store)

    balances = (
        load_genesis(settings.ACA_GENESIS_FILE) if settings.ACA_GENESIS_FILE
        else {peer.id: settings.ACA_DEFAULT_BALANCE for peer in peer_list}
    )
    _ledger = LedgerState.from_genesis(balances)
    engine.add_delivery_sink(LedgerSink(_ledger, crypto))

    if settings.ACA_JOURNAL_DIR:
        path = Path(settings.ACA_JOURNAL_DIR) / f'node-{index}.journal'
        journal = EventJournal(path, crypto.suite.name, peer_list.digest())
        restored = engine.replay(journal.read())
        if restored:
            logger.info('Restored %d events from %s', restored, path)
        store.journal = journal

    return GossipNode(engine, HttpTransport(timeout=settings.ACA_SYNC_TIMEOUT))


def get_local_node() -> GossipNode:
    global _node
    with _lock:
        if _node is None:
            _node = build_local_node()
        return _node


def set_local_node(node: Optional[GossipNode], ledger: Optional[LedgerState] = None) -> None:
    """Install (or clear) the process node; tests use this to inject one."""
    global _node, _ledger
    with _lock:
        _node = node
        _ledger = ledger


def get_local_ledger() -> Optional[LedgerState]:
    return _ledger
