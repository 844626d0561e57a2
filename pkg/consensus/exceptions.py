"""Errors raised by the consensus engine and its gossip layer.

Configuration problems are reported with Django's ``ImproperlyConfigured``;
everything below is a protocol-level failure.
"""


class ConsensusError(Exception):
    """Base class for all protocol failures."""


class IntegrityFault(ConsensusError):
    """Two pieces of data that must agree do not (duplicate ids, forks, flag tables)."""


class ProtocolViolation(ConsensusError):
    """An event or request breaks a rule of the algorithm and is refused."""


class OrderingViolation(ConsensusError):
    """Frames were asked to finalise out of sequence."""


class UnknownPeer(ConsensusError):
    """A peer id is not part of the network's peer list."""


class SigningError(ConsensusError):
    """A signature could not be produced."""


class OrphanBufferFull(ConsensusError):
    """The orphan buffer reached capacity; the sync layer should back off."""


class MalformedMessage(ConsensusError):
    """Bytes received from the wire or a journal could not be decoded."""


class TransportError(ConsensusError):
    """A synchronisation exchange could not be completed."""


class ReplayMismatch(ConsensusError):
    """A replayed simulation did not reproduce the recorded report."""
