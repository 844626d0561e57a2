"""
Transports carry opaque request bytes to a peer and bring back its reply.

``QueueNetwork`` wires nodes together in one process (threaded mode);
``HttpTransport`` posts to another node's ``/sync/`` endpoint.
"""

import logging
import queue
import threading
from typing import Callable, Dict, Optional, Tuple

import requests

from consensus.exceptions import TransportError

logger = logging.getLogger(__name__)

Responder = Callable[[Optional[bytes]], None]
_CLOSED = object()


class QueueNetwork:
    """In-process message fabric: one inbox per peer."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout
        self._inboxes: Dict[bytes, queue.Queue] = {}
        self._lock = threading.Lock()

    def inbox(self, peer_id: bytes) -> queue.Queue:
        with self._lock:
            return self._inboxes.setdefault(peer_id, queue.Queue())

    def bind(self, peer_id: bytes) -> 'QueueTransport':
        self.inbox(peer_id)
        return QueueTransport(self, peer_id)

    def close(self) -> None:
        with self._lock:
            inboxes = list(self._inboxes.values())
        for inbox in inboxes:
            inbox.put(_CLOSED)


class QueueTransport:
    def __init__(self, network: QueueNetwork, peer_id: bytes):
        self.network = network
        self.peer_id = peer_id

    def request(self, peer, payload: bytes) -> bytes:
        replies: queue.Queue = queue.Queue(maxsize=1)
        self.network.inbox(peer.id).put((payload, replies.put))
        try:
            data = replies.get(timeout=self.network.timeout)
        except queue.Empty as exc:
            raise TransportError(f'No reply from {peer.short_id} within {self.network.timeout}s') from exc
        if data is None:
            raise TransportError(f'{peer.short_id} refused the request')
        return data

    def receive(self) -> Optional[Tuple[bytes, Responder]]:
        item = self.network.inbox(self.peer_id).get()
        if item is _CLOSED:
            return None
        return item


class HttpTransport:
    """
    Synchronise with peers over HTTP.

    Attributes:
        timeout (float): seconds to wait for a peer before giving up
        session (requests.Session): connection pool shared by all requests
    """

    def __init__(self, timeout: float = 5.0, session: Optional[requests.Session] = None):
        self.timeout = timeout
        self.session = session or requests.Session()

    def request(self, peer, payload: bytes) -> bytes:
        if not peer.net_address:
            raise TransportError(f'No address known for {peer.short_id}')
        url = f'http://{peer.net_address}/sync/'
        try:
            response = self.session.post(
                url,
                data=payload,
                headers={'Content-Type': 'application/octet-stream'},
                timeout=self.timeout,
            )
            response.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(f'Sync with {url} failed: {exc}') from exc
        return response.content
