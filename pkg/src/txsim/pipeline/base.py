"""Shared pipeline plumbing: peers, ordering backends, clients, the drive loop.

A pipeline wires N peer nodes (each with its own StateStore) plus a client
manager over one simulator.  Whole blocks (transaction-based lifecycles) or
individual write operations (storage-based) flow through an ordering backend
chosen by the replication approach: a consensus group across the peers, an
external trusted shared log, or a primary-backup chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

from ..authstore import StateStore
from ..consensus import PbftComponent, ProtocolHost, RaftComponent, RaftTiming
from ..core.rng import seeded_rng
from ..core.types import (
    CostModel,
    DesignConfig,
    FailureModel,
    Transaction,
    TxnOutcome,
)
from ..simnet import Simulator
from ..workload import WorkloadSpec, generate, initial_state
from .records import TxnRecord


@dataclass(frozen=True)
class Arrival:
    mode: str  # "open_loop" | "closed_loop"
    rate_tps: float = 0.0  # open loop: mean submissions per virtual second
    clients: int = 1  # closed loop: concurrent clients

    @classmethod
    def open_loop(cls, rate_tps: float) -> "Arrival":
        if rate_tps <= 0:
            raise ValueError("open_loop rate must be positive")
        return cls("open_loop", rate_tps=rate_tps)

    @classmethod
    def closed_loop(cls, clients: int) -> "Arrival":
        if clients < 1:
            raise ValueError("closed_loop needs at least one client")
        return cls("closed_loop", clients=clients)


@dataclass
class SubmitTimer:
    txn_id: int
    kind: str = field(default="cl:submit", init=False)


class CostMixin:
    def charge(self, cost: int) -> None:
        self._pending_cost += cost

    def hash_cost(self, ops: int, nbytes: int) -> int:
        cm = self.pipeline.cm
        return ops * cm.hash_time_base + int(nbytes * cm.hash_time_per_byte)

    def on_message(self, msg) -> int:
        cost = super().on_message(msg)
        extra, self._pending_cost = self._pending_cost, 0
        return cost + extra


class PeerNode(CostMixin, ProtocolHost):
    """A replica's protocol lane: consensus and request handling.

    Execution work (block application, validation) runs on the peer's worker
    twin so that heavy applies never freeze heartbeats or protocol timers,
    the way a separate execution thread behaves on a real node.  The state
    store lives here; the worker is its single writer.
    """

    def __init__(self, node_id, pipeline):
        super().__init__(node_id)
        self.pipeline = pipeline
        self.state = pipeline.new_state_store()
        self.worker = None  # twin execution node, set by build_peers
        self._pending_cost = 0

    def to_worker(self, payload) -> None:
        self.local(self.worker.node_id, payload)


class WorkerNode(CostMixin, ProtocolHost):
    """A replica's execution lane; shares the peer's state store."""

    def __init__(self, peer: PeerNode):
        super().__init__(("exec", peer.node_id))
        self.peer = peer
        self.pipeline = peer.pipeline
        self._pending_cost = 0

    @property
    def state(self):
        return self.peer.state


class ClientManager(ProtocolHost):
    """Runs every logical client as event-driven state; zero processing cost."""

    def __init__(self, pipeline):
        super().__init__("clients")
        self.pipeline = pipeline
        self.register("cl", self.handle_client)

    def handle_client(self, msg) -> int:
        if isinstance(msg, SubmitTimer):
            self.pipeline.begin_txn(msg.txn_id)
        else:
            self.pipeline.client_message(msg)
        return 0


class PipelineBase:
    observer_id = 0  # latencies and replay oracles are measured at this peer

    def __init__(
        self,
        cfg: DesignConfig,
        spec: WorkloadSpec,
        arrival: Arrival,
        seed: int,
        trace: bool = False,
    ):
        self.cfg = cfg
        self.cm: CostModel = cfg.cost_model
        self.spec = spec
        self.arrival = arrival
        self.seed = seed
        self.sim = Simulator(
            rng=seeded_rng(seed, "net"),
            latency_fn=self.cm.net_delay,
            allow_byzantine=cfg.failure_model is FailureModel.BFT,
            trace=trace,
        )
        self.txns: List[Transaction] = generate(spec)
        self.records: Dict[int, TxnRecord] = {
            txn.id: TxnRecord(txn=txn) for txn in self.txns
        }
        self.dropped: set = set()
        self._terminal = 0
        self.peers: List[PeerNode] = []
        self.clients = ClientManager(self)
        self._client_cursor = 0  # next stream index for closed-loop clients

    # -- construction helpers ------------------------------------------------

    def new_state_store(self) -> StateStore:
        return StateStore(index=self.cfg.index, ledger_enabled=self.cfg.ledger_enabled)

    def build_peers(self, peer_cls, worker_cls=None) -> None:
        for i in range(self.cfg.node_count):
            peer = peer_cls(i, self)
            self.sim.add_node(peer)
            if worker_cls is not None:
                peer.worker = worker_cls(peer)
                self.sim.add_node(peer.worker)
            self.peers.append(peer)
        self.sim.add_node(self.clients)

    def attach_consensus(self, on_commit_factory) -> Dict[int, object]:
        """Raft or PBFT across all peers, per the failure model."""
        components = {}
        replicas = [p.node_id for p in self.peers]
        if self.cfg.failure_model is FailureModel.CFT:
            timing = RaftTiming.from_mean_latency(self.cm.net_latency_mean)
            for peer in self.peers:
                comp = RaftComponent(
                    replicas,
                    timing,
                    seeded_rng(self.seed, f"timeout-{peer.node_id}"),
                    on_commit=on_commit_factory(peer),
                )
                comp.attach(peer)
                # benchmark clusters run with leadership already settled
                comp.start_bootstrapped(replicas[0])
                components[peer.node_id] = comp
        else:
            # pipeline runs never crash replicas, so the progress timer (and
            # with it view changes) stays off; the proposer is stable
            for peer in self.peers:
                comp = PbftComponent(
                    replicas,
                    timing=None,
                    on_commit=on_commit_factory(peer),
                    msg_cost=self.cm.sig_verify_time,
                )
                comp.attach(peer)
                components[peer.node_id] = comp
        return components

    def preload(self) -> None:
        writes = initial_state(self.spec)
        for peer in self.peers:
            peer.state.apply_batch(writes)
            # pre-population is setup, not measured work
            peer.state.meter.ops = 0
            peer.state.meter.bytes = 0
            if peer.state.ledger is not None:
                peer.state.ledger.block_bytes = 0

    # -- arrivals ----------------------------------------------------------------

    def schedule_arrivals(self) -> None:
        if self.arrival.mode == "open_loop":
            interval = max(1, int(1_000_000 / self.arrival.rate_tps))
            for i, txn in enumerate(self.txns):
                self.sim.schedule(self.clients.node_id, SubmitTimer(txn.id), delay=i * interval)
        else:
            for _ in range(min(self.arrival.clients, len(self.txns))):
                self._submit_next()

    def _submit_next(self) -> None:
        if self._client_cursor >= len(self.txns):
            return
        txn = self.txns[self._client_cursor]
        self._client_cursor += 1
        self.sim.schedule(self.clients.node_id, SubmitTimer(txn.id), delay=0)

    def txn_finished(self, record: TxnRecord) -> None:
        """Bookkeeping common to every terminal outcome."""
        self._terminal += 1
        if self.arrival.mode == "closed_loop":
            self._submit_next()

    def mark_dropped(self, record: TxnRecord) -> None:
        if record.txn.id not in self.dropped:
            self.dropped.add(record.txn.id)
            self.txn_finished(record)

    # -- hooks the concrete pipelines implement -----------------------------------

    def begin_txn(self, txn_id: int) -> None:
        raise NotImplementedError

    def client_message(self, msg) -> None:
        raise NotImplementedError

    # -- the drive loop ----------------------------------------------------------

    def committed_count(self) -> int:
        return sum(1 for r in self.records.values() if r.outcome is TxnOutcome.COMMITTED)

    def all_done(self) -> bool:
        return self._terminal >= len(self.txns)

    def drive(
        self,
        stall_window: int = 3_000_000,
        max_virtual: int = 600_000_000,
        chunk: int = 100_000,
    ) -> bool:
        """Run to completion or stall; returns True when the run stalled."""
        last_progress = self.sim.now
        last_terminal = self._terminal
        while True:
            if self.all_done():
                return False
            if self.sim.pending() == 0:
                return not self.all_done()
            self.sim.run(until=self.sim.now + chunk)
            if self._terminal > last_terminal:
                last_terminal = self._terminal
                last_progress = self.sim.now
            if self.sim.now - last_progress >= stall_window:
                return True
            if self.sim.now >= max_virtual:
                return True
