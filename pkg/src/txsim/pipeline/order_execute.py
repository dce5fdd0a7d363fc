"""Order-execute lifecycle: pre-execute, order blocks, re-execute everywhere.

The proposer executes transactions serially at the ledger tip, batches them
into a block (closed at the size limit or timeout), and hands the block to
the ordering backend (consensus across the peers, or the external shared
log).  Every node then re-executes the block serially, appends it to its
ledger, and recomputes the index root when one is configured.  Serial
execution admits no conflicts, so the abort rate is structurally zero; each
transaction is executed exactly twice along its lifecycle (proposal and
commit).  The next block is proposed only after the previous one commits,
which couples throughput to the ledger's sequentiality.

Execution runs on each replica's worker lane, so heavy block applies delay
later blocks (they queue) without freezing consensus heartbeats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..consensus.sharedlog import LogAppend, LogDeliver, SharedLogService
from ..core.encoding import decode_block, encode_block
from ..core.types import Block, ReplicationApproach, TxnOutcome
from .base import Arrival, PeerNode, PipelineBase, WorkerNode


@dataclass
class OeSubmit:
    txn_id: int
    kind: str = field(default="oe:submit", init=False)


@dataclass
class OeBlockTimer:
    token: int
    kind: str = field(default="oe:block_timer", init=False)


@dataclass
class OeProposeReady:
    payload: bytes
    kind: str = field(default="oe:propose", init=False)


@dataclass
class OeApplied:
    kind: str = field(default="oe:applied", init=False)


@dataclass
class PreExecTask:
    txn_ids: tuple
    kind: str = field(default="oex:pre_exec", init=False)


@dataclass
class ApplyTask:
    payload: bytes
    ordered_at: int  # when the ordering layer handed this block to the peer
    kind: str = field(default="oex:apply", init=False)


@dataclass
class OeDone:
    txn_id: int
    kind: str = field(default="cl:oe_done", init=False)


@dataclass
class RetrySubmit:
    txn_id: int
    kind: str = field(default="cl:retry", init=False)


class OePeer(PeerNode):
    def __init__(self, node_id, pipeline):
        super().__init__(node_id, pipeline)
        self.register("oe", self.handle_oe)
        self.register("slog", self.handle_oe)  # deliveries from the shared log
        self.pending = []
        self.in_flight = False
        self.timer_token = 0
        self.consensus = None  # set when the backend is consensus

    def is_proposer(self) -> bool:
        if self.consensus is not None:
            return self.consensus.is_leader()
        return self.node_id == 0  # static assembler in front of the shared log

    def handle_oe(self, msg) -> int:
        if isinstance(msg, OeSubmit):
            self.pending.append(msg.txn_id)
            if len(self.pending) == 1:
                self.timer_token += 1
                self.set_timer(self.pipeline.cm.block_timeout, OeBlockTimer(self.timer_token))
            self.maybe_close_block()
        elif isinstance(msg, OeBlockTimer):
            if msg.token == self.timer_token and self.pending:
                self.maybe_close_block(force=True)
        elif isinstance(msg, OeProposeReady):
            if self.consensus is not None:
                self.consensus.propose(msg.payload)
            else:
                self.send("orderer", LogAppend(msg.payload, None))
        elif isinstance(msg, LogDeliver):
            self.to_worker(ApplyTask(msg.entry, self.now))
        elif isinstance(msg, OeApplied):
            if self.is_proposer():
                self.in_flight = False
                self.maybe_close_block(force=bool(self.pending))
        return 0

    def maybe_close_block(self, force: bool = False) -> None:
        limit = self.pipeline.cm.block_size_limit
        if self.in_flight or not self.is_proposer() or not self.pending:
            return
        if len(self.pending) < limit and not force:
            return
        batch, self.pending = self.pending[:limit], self.pending[limit:]
        self.in_flight = True
        self.to_worker(PreExecTask(tuple(batch)))


class OeWorker(WorkerNode):
    def __init__(self, peer):
        super().__init__(peer)
        self.register("oex", self.handle)

    def handle(self, msg) -> int:
        if isinstance(msg, PreExecTask):
            self.pre_execute(msg.txn_ids)
        elif isinstance(msg, ApplyTask):
            self.apply_block(msg.payload, msg.ordered_at)
        return 0

    def pre_execute(self, txn_ids) -> None:
        """Serial execution at the ledger tip; the block proposal follows."""
        cumulative = 0
        txns = []
        for txn_id in txn_ids:
            record = self.pipeline.records[txn_id]
            cumulative += self.pipeline.exec_cost(record.txn)
            record.executions += 1
            record.execute_us = self.now + cumulative - record.submit_time
            txns.append(record.txn)
        self.charge(cumulative)
        ledger = self.state.ledger
        height = len(ledger.blocks) if ledger else self.pipeline.next_height
        self.pipeline.next_height = height + 1
        block = Block(
            height=height,
            parent_digest=ledger.tip_digest if ledger else bytes(32),
            txn_list=tuple(txns),
            proposer=self.peer.node_id,
            state_root=self.state.index_root() if self.state.index else None,
        )
        self.local(self.peer.node_id, OeProposeReady(encode_block(block)))

    def apply_block(self, payload: bytes, ordered_at: int) -> None:
        block = decode_block(payload)
        observer = self.peer.node_id == self.pipeline.observer_id
        cumulative = 0
        if self.state.ledger is not None:
            _, size = self.state.ledger.append(block)
            ledger_cost = self.hash_cost(1, size)
            self.charge(ledger_cost)
            cumulative += ledger_cost
        for txn in block.txn_list:
            record = self.pipeline.records[txn.id]
            cost = self.pipeline.exec_cost(txn)
            if not txn.app_abort and txn.write_set:
                _, hops, hbytes = self.state.apply_batch(txn.write_set)
                cost += self.hash_cost(hops, hbytes)
            self.charge(cost)
            cumulative += cost
            if record.order_time is None:
                record.order_time = ordered_at
                record.order_us = max(0, ordered_at - record.submit_time - record.execute_us)
            if observer:
                record.executions += 1
                done_at = self.now + cumulative
                record.validate_us = cumulative
                if txn.app_abort:
                    record.settle(TxnOutcome.ABORTED_APPLICATION, done_at)
                else:
                    record.settle(TxnOutcome.COMMITTED, done_at)
                self.send("clients", OeDone(txn.id))
        self.local(self.peer.node_id, OeApplied())


class OrderExecutePipeline(PipelineBase):
    def __init__(self, cfg, spec, arrival: Arrival, seed: int, trace: bool = False):
        super().__init__(cfg, spec, arrival, seed, trace)
        self.next_height = 0
        self.build_peers(OePeer, OeWorker)
        if cfg.replication_approach is ReplicationApproach.SHARED_LOG:
            orderer = SharedLogService("orderer", ack_delay=self.cm.net_latency_mean)
            self.sim.add_node(orderer)
            for peer in self.peers:
                orderer.subscribe(peer.node_id)
        elif cfg.replication_approach is ReplicationApproach.CONSENSUS:
            comps = self.attach_consensus(
                lambda peer: (
                    lambda idx, payload, p=peer: p.to_worker(ApplyTask(payload, p.now))
                )
            )
            for peer in self.peers:
                peer.consensus = comps[peer.node_id]
        else:
            raise ValueError(
                "order-execute supports consensus or shared_log ordering, "
                f"not {cfg.replication_approach.value}"
            )
        self.preload()
        self.schedule_arrivals()

    def exec_cost(self, txn) -> int:
        return self.cm.exec_time_per_op * max(1, txn.op_count)

    def begin_txn(self, txn_id: int) -> None:
        record = self.records[txn_id]
        if record.submit_time is None:
            record.submit_time = self.sim.now
        proposer = next((p for p in self.peers if p.is_proposer()), None)
        if proposer is None:
            # no elected leader yet; retry shortly
            self.clients.set_timer(2_000, RetrySubmit(txn_id))
            return
        self.clients.send(proposer.node_id, OeSubmit(txn_id))

    def client_message(self, msg) -> None:
        if isinstance(msg, RetrySubmit):
            self.begin_txn(msg.txn_id)
        elif isinstance(msg, OeDone):
            self.txn_finished(self.records[msg.txn_id])
