"""
TxFlow: an account ledger fed by finalised transactions.

Transfers are signed by the sender's key (an account id is the owner's
Ed25519 public key) and carry a per-sender nonce. Every node applies the
same finalised sequence, so every node ends with the same balances; of two
conflicting transfers only the one ordered first can succeed.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Mapping, NamedTuple, Optional, Tuple, Union

from django.core.exceptions import ImproperlyConfigured

from consensus import codec
from consensus.exceptions import MalformedMessage

logger = logging.getLogger(__name__)

TRANSFER_TAG = b'TXF1'


class Rejection(str, Enum):
    MALFORMED = 'malformed'
    SIGNATURE = 'signature'
    NONCE = 'nonce'
    FUNDS = 'funds'
    UNKNOWN_ACCOUNT = 'unknown_account'


class LedgerOutcome(NamedTuple):
    applied: bool
    reason: Optional[Rejection] = None


APPLIED = LedgerOutcome(True)


@dataclass(frozen=True)
class Transfer:
    sender: bytes
    recipient: bytes
    amount: int
    nonce: int
    signature: bytes = b''

    def canonical_bytes(self) -> bytes:
        return (
            codec.Writer()
            .blob(self.sender)
            .blob(self.recipient)
            .u64(self.amount)
            .u64(self.nonce)
            .getvalue()
        )

    def signed(self, key) -> 'Transfer':
        return replace(self, signature=key.sign(self.canonical_bytes()))

    def to_bytes(self) -> bytes:
        return (
            codec.Writer()
            .raw(TRANSFER_TAG)
            .blob(self.canonical_bytes())
            .blob(self.signature)
            .getvalue()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Transfer':
        if not data.startswith(TRANSFER_TAG):
            raise MalformedMessage('Not a transfer')
        reader = codec.Reader(data[len(TRANSFER_TAG):])
        body = codec.Reader(reader.blob())
        transfer = cls(
            sender=body.blob(),
            recipient=body.blob(),
            amount=body.u64(),
            nonce=body.u64(),
        )
        body.expect_end()
        transfer = replace(transfer, signature=reader.blob())
        reader.expect_end()
        return transfer

    @property
    def transfer_id(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()


@dataclass
class Account:
    id: bytes
    balance: int
    next_nonce: int = 1


@dataclass
class LedgerState:
    accounts: Dict[bytes, Account] = field(default_factory=dict)
    applied: int = 0
    rejected: int = 0
    # rolling digest over every processed transaction and its outcome
    digest: bytes = bytes(32)

    @classmethod
    def from_genesis(cls, balances: Mapping[bytes, int]) -> 'LedgerState':
        return cls(accounts={
            account_id: Account(account_id, balance) for account_id, balance in balances.items()
        })

    @property
    def total_balance(self) -> int:
        return sum(account.balance for account in self.accounts.values())

    def _record(self, data: bytes, outcome: LedgerOutcome) -> None:
        marker = b'A' if outcome.applied else b'R' + outcome.reason.value.encode()
        self.digest = hashlib.sha256(self.digest + data + marker).digest()
        if outcome.applied:
            self.applied += 1
        else:
            self.rejected += 1


def _check(transfer: Transfer, state: LedgerState, crypto) -> LedgerOutcome:
    sender = state.accounts.get(transfer.sender)
    if sender is None or not crypto.verify_signature(
        transfer.sender, transfer.signature, transfer.canonical_bytes()
    ):
        return LedgerOutcome(False, Rejection.SIGNATURE)
    if transfer.nonce != sender.next_nonce:
        return LedgerOutcome(False, Rejection.NONCE)
    if transfer.amount > sender.balance:
        return LedgerOutcome(False, Rejection.FUNDS)
    if transfer.recipient not in state.accounts:
        return LedgerOutcome(False, Rejection.UNKNOWN_ACCOUNT)
    return APPLIED


def apply_finalised_transfer(transfer: Transfer, state: LedgerState, crypto) -> Tuple[LedgerState, LedgerOutcome]:
    """
    Apply one finalised transfer.

    Checks run in a fixed order: signature, nonce, funds, recipient. A
    rejected transfer changes nothing but the counters and the digest.

    Args:
        transfer (Transfer): decoded transfer
        state (LedgerState): ledger to update in place
        crypto (CryptoService): used to verify the sender's signature

    Returns:
        Tuple[LedgerState, LedgerOutcome]: the updated state and what happened
    """
    outcome = _check(transfer, state, crypto)
    if outcome.applied:
        sender = state.accounts[transfer.sender]
        sender.balance -= transfer.amount
        sender.next_nonce += 1
        state.accounts[transfer.recipient].balance += transfer.amount
    state._record(transfer.to_bytes(), outcome)
    return state, outcome


def apply_transaction_bytes(data: bytes, state: LedgerState, crypto) -> Tuple[LedgerState, LedgerOutcome]:
    try:
        transfer = Transfer.from_bytes(data)
    except MalformedMessage:
        outcome = LedgerOutcome(False, Rejection.MALFORMED)
        state._record(data, outcome)
        return state, outcome
    return apply_finalised_transfer(transfer, state, crypto)


def ledger_digest(state: LedgerState) -> bytes:
    writer = codec.Writer()
    for account_id in sorted(state.accounts):
        account = state.accounts[account_id]
        writer.blob(account_id).u64(account.balance).u64(account.next_nonce)
    writer.u64(state.applied).u64(state.rejected)
    return hashlib.sha256(writer.getvalue()).digest()


def parse_genesis(text: str) -> Dict[bytes, int]:
    """Parse ``<account hex> <balance>`` lines. Blank lines and ``#`` comments are ignored."""
    balances = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ImproperlyConfigured(f'Genesis line {number}: expected "<account> <balance>"')
        try:
            account_id, balance = bytes.fromhex(parts[0]), int(parts[1])
        except ValueError:
            raise ImproperlyConfigured(f'Genesis line {number}: cannot parse {line!r}') from None
        if balance < 0:
            raise ImproperlyConfigured(f'Genesis line {number}: negative balance')
        if account_id in balances:
            raise ImproperlyConfigured(f'Genesis line {number}: duplicate account')
        balances[account_id] = balance
    return balances


def load_genesis(path: Union[str, Path]) -> Dict[bytes, int]:
    return parse_genesis(Path(path).read_text())


def render_genesis(balances: Mapping[bytes, int]) -> str:
    return ''.join(f'{account_id.hex()} {balances[account_id]}\n' for account_id in sorted(balances))


class LedgerSink:
    """Delivery sink that feeds finalised transfers into a ledger."""

    def __init__(self, state: LedgerState, crypto,
                 on_outcome: Optional[Callable[[bytes, LedgerOutcome], None]] = None):
        self.state = state
        self.crypto = crypto
        self.on_outcome = on_outcome

    def __call__(self, transaction: bytes, event) -> None:
        if not transaction.startswith(TRANSFER_TAG):
            return
        _, outcome = apply_transaction_bytes(transaction, self.state, self.crypto)
        if not outcome.applied:
            logger.info('Transfer in %s rejected: %s', event.short_id, outcome.reason.value)
        if self.on_outcome is not None:
            self.on_outcome(transaction, outcome)
