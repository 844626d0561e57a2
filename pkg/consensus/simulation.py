"""
Deterministic discrete-event simulation of an ACA network.

Every node runs a real engine and gossip layer; the simulator owns time.
Actions (heartbeats, request deliveries, reply deliveries) sit in a heap
ordered by (step, sequence), message delays come from a seeded numpy
generator, and messages travel as real wire bytes. The same config and
seed always produce the same schedule and a byte-identical report.
"""

import hashlib
import heapq
import itertools
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.core.exceptions import ImproperlyConfigured

from consensus.audit import audit_store
from consensus.conf import EngineConfig
from consensus.crypto import CryptoService, network_identities
from consensus.engine import ConsensusEngine, root_majority
from consensus.events import Event, FinalOrder
from consensus.exceptions import ConsensusError, IntegrityFault, ReplayMismatch
from consensus.gossip import GossipNode, PeerSelector, RandomPeerSelector, SyncReply
from consensus.ledger import LedgerOutcome, LedgerSink, LedgerState, Transfer, ledger_digest
from consensus.peers import LamportInit, PeerList
from consensus.transport import QueueNetwork

logger = logging.getLogger(__name__)

SELECTOR_MODES = ('deterministic', 'random', 'mixed')
DELAY_MODELS = ('fixed', 'uniform')

HEARTBEAT = 'heartbeat'
REQUEST = 'request'
REPLY = 'reply'


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {raw!r}')


def _parse_optional_int(raw: str) -> Optional[int]:
    value = raw.strip().lower()
    return None if value in ('', 'none', 'default') else int(value)


_PARSERS = {
    int: int,
    float: float,
    str: str.strip,
    bool: _parse_bool,
    Optional[int]: _parse_optional_int,
}


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = 4
    rng_seed: int = 1
    max_steps: int = 10_000
    # stop once every node finalised this many frames (0: no bound)
    max_finalised_frames: int = 0
    # stop once every node created this many events (0: no bound)
    min_events_per_node: int = 0
    heartbeat: int = 10
    # deterministic | random | mixed | comma-separated list with one mode per node
    selector_mode: str = 'deterministic'
    delay_model: str = 'fixed'
    delay_min: int = 1
    delay_max: int = 1
    tx_injection_rate: float = 0.0
    root_majority_override: Optional[int] = None
    lamport_init_strategy: str = LamportInit.ALL_ZERO.value
    lamport_byte_index: int = 13
    stripping_enabled: bool = True
    # 0 compares whole self-ancestor chains
    compare_depth: int = 0
    txflow_transfers: int = 0
    txflow_double_spends: int = 0
    initial_balance: int = 1000
    audit: bool = False

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ImproperlyConfigured('n_nodes must be at least 2')
        if self.max_steps < 0 or self.heartbeat < 0:
            raise ImproperlyConfigured('max_steps and heartbeat cannot be negative')
        if self.delay_model not in DELAY_MODELS:
            raise ImproperlyConfigured(f'delay_model must be one of {DELAY_MODELS}')
        if self.delay_min < 0 or self.delay_max < self.delay_min:
            raise ImproperlyConfigured('Delays must satisfy 0 <= delay_min <= delay_max')
        if self.tx_injection_rate < 0:
            raise ImproperlyConfigured('tx_injection_rate cannot be negative')
        if self.compare_depth < 0:
            raise ImproperlyConfigured('compare_depth cannot be negative')
        if self.txflow_transfers < 0 or not 0 <= 2 * self.txflow_double_spends <= self.txflow_transfers:
            raise ImproperlyConfigured('Each double spend takes two of txflow_transfers')
        modes = self.selector_modes()
        if len(modes) != self.n_nodes or any(mode not in SELECTOR_MODES[:2] for mode in modes):
            raise ImproperlyConfigured(f'Invalid selector_mode {self.selector_mode!r}')
        self.engine_config()
        root_majority(self.n_nodes, self.root_majority_override)

    def selector_modes(self) -> List[str]:
        if self.selector_mode == 'mixed':
            return ['deterministic' if index % 2 == 0 else 'random' for index in range(self.n_nodes)]
        if ',' in self.selector_mode:
            return [mode.strip() for mode in self.selector_mode.split(',')]
        return [self.selector_mode] * self.n_nodes

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            lamport_init=self.lamport_init_strategy,
            lamport_byte_index=self.lamport_byte_index,
            root_majority=self.root_majority_override,
            strip_flag_tables=self.stripping_enabled,
            compare_depth=self.compare_depth or None,
        )

    @property
    def txflow(self) -> bool:
        return self.txflow_transfers > 0

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: Optional['SimConfig'] = None) -> 'SimConfig':
        known = {item.name: item for item in fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if key not in known:
                raise ImproperlyConfigured(f'Unknown simulation setting: {key}')
            parser = _PARSERS[known[key].type]
            try:
                parsed[key] = parser(raw)
            except ValueError as exc:
                raise ImproperlyConfigured(f'Bad value for {key}: {exc}') from None
        return replace(base or cls(), **parsed)

    @classmethod
    def from_text(cls, text: str, overrides: Optional[Mapping[str, str]] = None,
                  base: Optional['SimConfig'] = None) -> 'SimConfig':
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ImproperlyConfigured(f'Config line {number}: expected key = value')
            key, raw = line.split('=', 1)
            values[key.strip()] = raw.strip()
        values.update(overrides or {})
        return cls.from_mapping(values, base)

    def to_text(self) -> str:
        lines = []
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, bool):
                value = str(value).lower()
            elif value is None:
                value = 'none'
            lines.append(f'{item.name} = {value}')
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class AgreementVerdict:
    passed: bool
    frame: Optional[int] = None
    position: Optional[int] = None
    nodes: Optional[Tuple[int, int]] = None
    common_frames: int = 0

    def describe(self) -> str:
        if self.passed:
            return f'pass ({self.common_frames} frames finalised by two or more nodes)'
        return f'fail at frame {self.frame} position {self.position} between nodes {self.nodes}'


def check_agreement(logs: Sequence[Sequence[FinalOrder]]) -> AgreementVerdict:
    """Compare per-node finalised logs frame by frame and report the first divergence."""
    if len(logs) < 2:
        raise ValueError('Agreement needs the logs of at least two nodes')
    by_frame: Dict[int, List[Tuple[int, Tuple[bytes, ...]]]] = defaultdict(list)
    for node, log in enumerate(logs):
        for order in log:
            by_frame[order.frame].append((node, tuple(order.ordered_events)))
    common = 0
    for frame in sorted(by_frame):
        entries = by_frame[frame]
        if len(entries) < 2:
            continue
        common += 1
        reference_node, reference = entries[0]
        for node, ordered in entries[1:]:
            if ordered == reference:
                continue
            position = next(
                (index for index, (left, right) in enumerate(zip(reference, ordered)) if left != right),
                min(len(reference), len(ordered)),
            )
            return AgreementVerdict(False, frame, position, (reference_node, node), common)
    return AgreementVerdict(True, common_frames=common)


def inject_transactions(node: 'SimNode', rate: float, rng: np.random.Generator, now: int) -> int:
    """Submit Poisson(rate x elapsed steps) fresh transactions to ``node``."""
    elapsed = now - node.last_injection
    node.last_injection = now
    if rate <= 0 or elapsed <= 0:
        return 0
    count = int(rng.poisson(rate * elapsed))
    for _ in range(count):
        node.engine.submit(b'tx:%d:%d' % (node.index, node.injected))
        node.injected += 1
    return count


@dataclass
class TransferSlot:
    """Transfers sharing one sender nonce, each routed to the node that submits it."""

    nonce: int
    transfers: Tuple[Transfer, ...]
    routes: Tuple[int, ...]

    @property
    def is_double_spend(self) -> bool:
        return len(self.transfers) > 1


@dataclass
class Wallet:
    """Client behaviour for one account: submit a slot, wait until it settles, repeat."""

    account: bytes
    slots: List[TransferSlot] = field(default_factory=list)
    cursor: int = 0

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.slots)

    def step(self, nodes: Sequence['SimNode'], ledger: LedgerState) -> None:
        if self.done:
            return
        slot = self.slots[self.cursor]
        if ledger.accounts[self.account].next_nonce != slot.nonce:
            return
        for transfer, route in zip(slot.transfers, slot.routes):
            nodes[route].engine.submit(transfer.to_bytes())
        self.cursor += 1


@dataclass
class SimNode:
    index: int
    engine: ConsensusEngine
    gossip: GossipNode
    delivered: List[bytes] = field(default_factory=list)
    injected: int = 0
    events_created: int = 0
    last_injection: int = 0
    iteration_started: int = 0
    ledger: Optional[LedgerState] = None
    wallet: Optional[Wallet] = None
    transfer_results: Dict[bytes, bool] = field(default_factory=dict)

    @property
    def frames_finalised(self) -> int:
        return len(self.engine.store.finalised)

    def on_delivery(self, transaction: bytes, event: Event) -> None:
        self.delivered.append(transaction)


@dataclass
class SimReport:
    config: SimConfig
    finalised_logs: List[List[FinalOrder]]
    agreement: AgreementVerdict
    frames_finalised: List[int]
    events_created: List[int]
    events_finalised: List[int]
    transactions_injected: List[int]
    transactions_delivered: List[int]
    violations: List[str]
    schedule_digest: str
    steps: int
    peer_ids: List[str]
    ledger_digests: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.agreement.passed and not self.violations

    def log_digest(self, node: int) -> str:
        hasher = hashlib.sha256()
        for order in self.finalised_logs[node]:
            hasher.update(b'%d:' % order.frame + b','.join(order.ordered_events) + b';')
        return hasher.hexdigest()

    def trailer(self) -> Dict[str, str]:
        values = {
            'agreement': 'pass' if self.agreement.passed else 'fail',
            'common_frames': str(self.agreement.common_frames),
            'min_frames_finalised': str(min(self.frames_finalised)),
            'min_events_created': str(min(self.events_created)),
            'n_nodes': str(self.config.n_nodes),
            'schedule_digest': self.schedule_digest,
            'seed': str(self.config.rng_seed),
            'steps': str(self.steps),
            'violations': str(len(self.violations)),
        }
        if self.ledger_digests:
            values['ledger_digest'] = self.ledger_digests[0] if len(set(self.ledger_digests)) == 1 else 'divergent'
        return values

    def render(self) -> str:
        lines = [
            'ACA simulation report',
            '',
            '[config]',
            self.config.to_text().rstrip('\n'),
            '',
            '[nodes]',
        ]
        for index, peer in enumerate(self.peer_ids):
            line = (
                f'node {index} peer={peer[:16]} frames={self.frames_finalised[index]} '
                f'created={self.events_created[index]} finalised_events={self.events_finalised[index]} '
                f'tx_injected={self.transactions_injected[index]} '
                f'tx_delivered={self.transactions_delivered[index]} log={self.log_digest(index)[:16]}'
            )
            if self.ledger_digests:
                line += f' ledger={self.ledger_digests[index][:16]}'
            lines.append(line)
        lines += ['', '[agreement]', self.agreement.describe(), '', '[violations]']
        lines += self.violations or ['none']
        lines += ['', '[summary]']
        lines += [f'{key}={value}' for key, value in self.trailer().items()]
        return '\n'.join(lines) + '\n'


class Simulator:
    """
    Run one seeded network to completion.

    Attributes:
        config (SimConfig): the run's parameters
        nodes (List[SimNode]): one per peer, in peer-list order
        violations (List[str]): invariant breaches observed during the run
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed)
        keys = network_identities(config.rng_seed, config.n_nodes)
        self.peer_list = PeerList.from_keys(keys)
        self.crypto = CryptoService()
        handles = {key.peer_id: key for key in keys}
        engine_config = config.engine_config()
        modes = config.selector_modes()
        self.nodes: List[SimNode] = []
        for index, peer in enumerate(self.peer_list):
            engine = ConsensusEngine.bootstrap(handles[peer.id], self.peer_list, self.crypto, engine_config)
            if modes[index] == 'random':
                selector = RandomPeerSelector(index, config.n_nodes, self.rng)
            else:
                selector = PeerSelector(index, config.n_nodes)
            node = SimNode(index, engine, GossipNode(engine, selector=selector))
            engine.add_delivery_sink(node.on_delivery)
            self.nodes.append(node)
        self.keys = [handles[peer.id] for peer in self.peer_list]
        self.now = 0
        self.violations: List[str] = []
        self._queue: List[tuple] = []
        self._sequence = itertools.count()
        self._trace = hashlib.sha256()
        self._total_transfers = 0
        self.double_spend_pairs: List[Tuple[bytes, bytes]] = []
        if config.txflow:
            self._setup_txflow()

    def _setup_txflow(self) -> None:
        config = self.config
        genesis = {peer.id: config.initial_balance for peer in self.peer_list}
        self._genesis_total = sum(genesis.values())
        for node in self.nodes:
            node.ledger = LedgerState.from_genesis(genesis)
            node.engine.add_delivery_sink(LedgerSink(node.ledger, self.crypto, self._outcome_recorder(node)))
            node.wallet = Wallet(node.engine.state.me.id)
        n = config.n_nodes
        kinds = ['pair'] * config.txflow_double_spends
        kinds += ['single'] * (config.txflow_transfers - 2 * config.txflow_double_spends)
        order = self.rng.permutation(len(kinds))
        next_nonce = [1] * n
        for position in order:
            sender = int(self.rng.integers(n))
            recipients = [index for index in range(n) if index != sender]
            nonce = next_nonce[sender]
            next_nonce[sender] += 1
            if kinds[position] == 'single':
                picks, routes = [recipients[int(self.rng.integers(len(recipients)))]], (sender,)
            else:
                picks = [recipients[int(index)] for index in self.rng.choice(len(recipients), size=min(2, len(recipients)), replace=False)]
                if len(picks) == 1:
                    picks = picks * 2
                elsewhere = recipients[int(self.rng.integers(len(recipients)))]
                routes = (sender, elsewhere)
            transfers = tuple(
                Transfer(
                    sender=self.keys[sender].peer_id,
                    recipient=self.keys[recipient].peer_id,
                    amount=int(self.rng.integers(1, 11)) + offset,
                    nonce=nonce,
                ).signed(self.keys[sender])
                for offset, recipient in enumerate(picks)
            )
            if len(transfers) == 2:
                self.double_spend_pairs.append((transfers[0].transfer_id, transfers[1].transfer_id))
            self.nodes[sender].wallet.slots.append(TransferSlot(nonce, transfers, routes))
            self._total_transfers += len(transfers)

    def _outcome_recorder(self, node: SimNode):
        def record(transaction: bytes, outcome: LedgerOutcome) -> None:
            node.transfer_results[hashlib.sha256(transaction).digest()] = outcome.applied
            if node.ledger.total_balance != self._genesis_total:
                self.violations.append(
                    f'step {self.now}: node {node.index} ledger holds {node.ledger.total_balance} '
                    f'units, genesis had {self._genesis_total}'
                )
        return record

    def _schedule(self, time: int, kind: str, src: int, dst: int, payload: Optional[bytes] = b'') -> None:
        heapq.heappush(self._queue, (time, next(self._sequence), kind, src, dst, payload))

    def _delay(self) -> int:
        if self.config.delay_model == 'uniform':
            return int(self.rng.integers(self.config.delay_min, self.config.delay_max + 1))
        return self.config.delay_min

    def _trace_step(self, time: int, kind: str, src: int, dst: int, payload: Optional[bytes]) -> None:
        self._trace.update(f'{time}|{kind}|{src}|{dst}|'.encode())
        self._trace.update(hashlib.sha256(payload or b'').digest())

    def run(self) -> SimReport:
        for node in self.nodes:
            self._schedule(0, HEARTBEAT, node.index, node.index)
        while self._queue:
            time, _, kind, src, dst, payload = heapq.heappop(self._queue)
            if time > self.config.max_steps:
                break
            self.now = time
            self._trace_step(time, kind, src, dst, payload)
            if kind == HEARTBEAT:
                self._on_heartbeat(src)
            elif kind == REQUEST:
                self._on_request(src, dst, payload)
            else:
                self._on_reply(src, dst, payload)
            if self._finished():
                break
        return self.report()

    def _on_heartbeat(self, index: int) -> None:
        node = self.nodes[index]
        node.iteration_started = self.now
        inject_transactions(node, self.config.tx_injection_rate, self.rng, self.now)
        if node.wallet is not None:
            node.wallet.step(self.nodes, node.ledger)
        peer = node.gossip.select_peer()
        target = self.peer_list.index_of(peer.id)
        self._schedule(self.now + self._delay(), REQUEST, index, target, node.gossip.build_request().to_bytes())

    def _on_request(self, requester: int, responder: int, payload: bytes) -> None:
        try:
            reply = self.nodes[responder].gossip.handle_request_bytes(payload)
        except ConsensusError as exc:
            self.violations.append(f'step {self.now}: node {responder} refused a request: {exc}')
            reply = None
        self._schedule(self.now + self._delay(), REPLY, responder, requester, reply)

    def _on_reply(self, responder: int, requester: int, payload: Optional[bytes]) -> None:
        node = self.nodes[requester]
        node.gossip.clock = self.now
        if payload is not None:
            try:
                created = node.gossip.apply_reply(
                    self.peer_list.peers[responder].id, SyncReply.from_bytes(payload)
                )
                if created is not None:
                    node.events_created += 1
            except ConsensusError as exc:
                self.violations.append(f'step {self.now}: node {requester}: {exc}')
        for orphan in node.engine.store.stale_orphans(self.now):
            message = f'node {requester}: orphan {orphan.short_id} exceeded its timeout'
            if message not in self.violations:
                self.violations.append(message)
        next_start = max(node.iteration_started + self.config.heartbeat, self.now + 1)
        self._schedule(next_start, HEARTBEAT, requester, requester)

    def _finished(self) -> bool:
        config = self.config
        if config.txflow:
            return self._txflow_settled()
        if not config.max_finalised_frames and not config.min_events_per_node:
            return False
        return all(
            node.frames_finalised >= config.max_finalised_frames
            and node.events_created >= config.min_events_per_node
            for node in self.nodes
        )

    def _txflow_settled(self) -> bool:
        return all(
            node.wallet.done and node.ledger.applied + node.ledger.rejected >= self._total_transfers
            for node in self.nodes
        )

    def _delivery_problems(self) -> List[str]:
        problems = []
        for node in self.nodes:
            if len(set(node.delivered)) != len(node.delivered):
                problems.append(f'node {node.index} delivered a transaction twice')
        if self.config.txflow:
            for first, second in self.double_spend_pairs:
                for node in self.nodes:
                    results = (node.transfer_results.get(first), node.transfer_results.get(second))
                    if None in results:
                        continue
                    if sum(results) != 1:
                        problems.append(
                            f'node {node.index}: double spend {first.hex()[:8]}/{second.hex()[:8]} '
                            f'applied {sum(results)} times'
                        )
        return problems

    def report(self) -> SimReport:
        violations = list(self.violations) + self._delivery_problems()
        if self.config.audit:
            for node in self.nodes:
                violations += audit_store(node.engine)
        logs = [list(node.engine.store.finalised) for node in self.nodes]
        return SimReport(
            config=self.config,
            finalised_logs=logs,
            agreement=check_agreement(logs),
            frames_finalised=[node.frames_finalised for node in self.nodes],
            events_created=[node.events_created for node in self.nodes],
            events_finalised=[sum(len(order.ordered_events) for order in log) for log in logs],
            transactions_injected=[node.injected for node in self.nodes],
            transactions_delivered=[len(node.delivered) for node in self.nodes],
            violations=violations,
            schedule_digest=self._trace.hexdigest(),
            steps=self.now,
            peer_ids=[peer.id.hex() for peer in self.peer_list],
            ledger_digests=[ledger_digest(node.ledger).hex() for node in self.nodes if node.ledger is not None],
        )


def run_simulation(config: SimConfig) -> SimReport:
    return Simulator(config).run()


# Sweep runs stop once every node has 200 events and 5 finalised frames.
SWEEP_BASE = SimConfig(
    selector_mode='mixed',
    delay_model='uniform',
    delay_min=0,
    delay_max=5,
    tx_injection_rate=0.2,
    min_events_per_node=200,
    max_finalised_frames=5,
    audit=True,
)


def sweep(base: SimConfig, node_counts: Iterable[int], seeds: Iterable[int],
          audit_every: int = 1) -> List[SimReport]:
    """Run every (size, seed) pair. With ``base.audit`` set, every ``audit_every``-th run is audited."""
    if audit_every < 1:
        raise ImproperlyConfigured('audit_every must be at least 1')
    seeds = list(seeds)
    reports = []
    for position, (n_nodes, seed) in enumerate(itertools.product(node_counts, seeds)):
        audit = base.audit and position % audit_every == 0
        report = run_simulation(replace(base, n_nodes=n_nodes, rng_seed=seed, audit=audit))
        logger.info('n=%d seed=%d agreement=%s', n_nodes, seed, report.agreement.passed)
        reports.append(report)
    return reports


def summarise(reports: Sequence[SimReport]) -> pd.DataFrame:
    """One row per network size: runs, passes, liveness minima and violation count."""
    runs = pd.DataFrame([
        {
            'n_nodes': report.config.n_nodes,
            'seed': report.config.rng_seed,
            'passed': report.passed,
            'frames': min(report.frames_finalised),
            'events': min(report.events_created),
            'violations': len(report.violations),
        }
        for report in reports
    ])
    if runs.empty:
        return runs
    return (
        runs.groupby('n_nodes')
        .agg(
            runs=('seed', 'count'),
            passed=('passed', 'sum'),
            min_frames=('frames', 'min'),
            min_events=('events', 'min'),
            violations=('violations', 'sum'),
        )
        .reset_index()
    )


@dataclass
class ThreadedResult:
    finalised_logs: List[List[FinalOrder]]
    agreement: AgreementVerdict
    iterations: List[int]
    errors: List[str]


def run_threaded(config: SimConfig, iterations: int = 20, heartbeat_seconds: float = 0.0,
                 timeout: float = 5.0) -> ThreadedResult:
    """Run the network on real threads over in-process queues.

    Scheduling is left to the OS, so only safety is comparable between
    runs, never the exact schedule.
    """
    keys = network_identities(config.rng_seed, config.n_nodes)
    peer_list = PeerList.from_keys(keys)
    crypto = CryptoService()
    handles = {key.peer_id: key for key in keys}
    network = QueueNetwork(timeout=timeout)
    seeds = np.random.SeedSequence(config.rng_seed).spawn(config.n_nodes)
    modes = config.selector_modes()
    nodes = []
    for index, peer in enumerate(peer_list):
        engine = ConsensusEngine.bootstrap(handles[peer.id], peer_list, crypto, config.engine_config())
        if modes[index] == 'random':
            selector = RandomPeerSelector(index, config.n_nodes, np.random.default_rng(seeds[index]))
        else:
            selector = PeerSelector(index, config.n_nodes)
        nodes.append(GossipNode(engine, network.bind(peer.id), selector))

    stop = threading.Event()
    done = [0] * len(nodes)
    errors: List[str] = []

    def procedure_a(position: int) -> None:
        try:
            done[position] = nodes[position].run_procedure_a(stop, heartbeat_seconds, iterations)
        except IntegrityFault as exc:
            errors.append(f'node {position}: {exc}')

    servers = [threading.Thread(target=node.serve_loop, daemon=True) for node in nodes]
    clients = [threading.Thread(target=procedure_a, args=(position,)) for position in range(len(nodes))]
    for thread in servers + clients:
        thread.start()
    for thread in clients:
        thread.join()
    network.close()
    for thread in servers:
        thread.join(timeout)

    logs = [list(node.engine.store.finalised) for node in nodes]
    return ThreadedResult(logs, check_agreement(logs), done, errors)


def replay_report(config_text: str, expected_report: str) -> SimReport:
    """Re-run a recorded configuration and insist on a byte-identical report."""
    report = run_simulation(SimConfig.from_text(config_text))
    if report.render() != expected_report:
        raise ReplayMismatch(
            f'Replay produced schedule {report.schedule_digest}, which differs from the recording'
        )
    return report
