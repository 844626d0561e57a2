"""Builders shared by the test modules."""

from consensus.crypto import CryptoService, network_identities
from consensus.engine import ConsensusEngine
from consensus.gossip import GossipNode
from consensus.peers import PeerList


class DirectTransport:
    """Calls the target node's reply procedure in-process."""

    def __init__(self):
        self.nodes = {}
        self.requests = 0

    def request(self, peer, payload):
        self.requests += 1
        return self.nodes[peer.id].handle_request_bytes(payload)


def ordered_keys(network_seed, size):
    """Key handles in peer-list order, together with the peer list."""
    keys = network_identities(network_seed, size)
    peer_list = PeerList.from_keys(keys)
    handles = {key.peer_id: key for key in keys}
    return [handles[peer.id] for peer in peer_list], peer_list


def build_engines(size, config=None, network_seed='test-network', crypto=None):
    crypto = crypto or CryptoService()
    keys, peer_list = ordered_keys(network_seed, size)
    return [ConsensusEngine.bootstrap(key, peer_list, crypto, config) for key in keys]


def build_gossip_nodes(size, config=None, network_seed='test-network'):
    transport = DirectTransport()
    nodes = [GossipNode(engine, transport) for engine in build_engines(size, config, network_seed)]
    for node in nodes:
        transport.nodes[node.peer_id] = node
    return nodes, transport


def deliver(event, *engines):
    """Hand a copy of ``event`` to each engine, as if it arrived in a bundle."""
    for engine in engines:
        engine.receive_event(event.detached())


def naive_order_key(event, store, depth=None):
    """Reference sort key: timestamp, self-ancestor timestamps, hash, id."""
    ancestry = []
    cursor = event
    while not cursor.is_leaf and (depth is None or len(ancestry) < depth):
        cursor = store.get_event(cursor.self_parent_id)
        ancestry.append(cursor.lamport_timestamp)
    return event.lamport_timestamp, tuple(ancestry), event.hash, event.id
