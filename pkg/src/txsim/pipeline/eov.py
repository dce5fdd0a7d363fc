"""Execute-order-validate lifecycle: simulate everywhere, order, validate serially.

Clients broadcast each transaction to all peers, which simulate it against
their own committed state and return the read versions they saw.  Peers
commit blocks at different moments, so a client can observe two peers answer
with different versions; it then aborts immediately (inconsistent read)
without ordering the transaction.  Matching endorsements are sent to the
ordering service (a trusted shared log by default, or consensus across the
peers), batched into blocks, and validated serially at every peer: a stale
read version aborts the transaction (read-write conflict), otherwise its
write set is applied.  Signature verification is charged per transaction
during validation.

Endorsement and validation run on each peer's worker lane.  Validation is
strictly serial there, so once arrivals outrun validation capacity, blocks
pile up in the worker queue and the validate phase is the one that grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

from ..core.encoding import Reader, Writer
from ..core.types import Block, ReplicationApproach, TxnOutcome
from .base import Arrival, PeerNode, PipelineBase, ProtocolHost, WorkerNode
from .occ import occ_validate


@dataclass
class EndorseReq:
    txn_id: int
    kind: str = field(default="eov:endorse_req", init=False)


@dataclass
class EndorseTask:
    txn_id: int
    kind: str = field(default="eovx:endorse", init=False)


@dataclass
class EndorseResp:
    txn_id: int
    peer: int
    reads: tuple  # ((key, version), ...) sorted by key
    kind: str = field(default="cl:endorse_resp", init=False)


@dataclass
class EndorseTimeout:
    txn_id: int
    kind: str = field(default="cl:endorse_timeout", init=False)


@dataclass
class OrderRequest:
    txn_id: int
    reads: tuple
    kind: str = field(default="ord:append", init=False)


@dataclass
class OrderTimer:
    token: int
    kind: str = field(default="ord:timer", init=False)


@dataclass
class EovBlockMsg:
    payload: bytes
    kind: str = field(default="eov:block", init=False)


@dataclass
class ValidateTask:
    payload: bytes
    kind: str = field(default="eovx:validate", init=False)


@dataclass
class EovDone:
    txn_id: int
    kind: str = field(default="cl:eov_done", init=False)


@dataclass
class RetryOrder:
    txn_id: int
    reads: tuple
    kind: str = field(default="cl:retry_order", init=False)


def encode_entries(entries) -> bytes:
    w = Writer()
    w.u32(len(entries))
    for txn_id, reads in entries:
        w.u64(txn_id)
        w.u32(len(reads))
        for key, version in reads:
            w.bytes(key)
            w.u64(version)
    return w.getvalue()


def decode_entries(payload: bytes):
    r = Reader(payload)
    out = []
    for _ in range(r.u32()):
        txn_id = r.u64()
        reads = tuple((r.bytes(), r.u64()) for _ in range(r.u32()))
        out.append((txn_id, reads))
    return out


class EovOrderer(ProtocolHost):
    """Trusted ordering service: dense sequencing plus block formation."""

    def __init__(self, pipeline):
        super().__init__("orderer")
        self.pipeline = pipeline
        self.register("ord", self.handle)
        self.pending = []
        self.token = 0

    def handle(self, msg) -> int:
        if isinstance(msg, OrderRequest):
            self.pending.append((msg.txn_id, msg.reads))
            if len(self.pending) == 1:
                self.token += 1
                self.set_timer(self.pipeline.cm.block_timeout, OrderTimer(self.token))
            if len(self.pending) >= self.pipeline.cm.block_size_limit:
                self.close_block()
        elif isinstance(msg, OrderTimer):
            if msg.token == self.token and self.pending:
                self.close_block()
        return 0

    def close_block(self) -> None:
        limit = self.pipeline.cm.block_size_limit
        batch, self.pending = self.pending[:limit], self.pending[limit:]
        for txn_id, _ in batch:
            record = self.pipeline.records[txn_id]
            record.order_time = self.now
            record.order_us = max(0, self.now - record.submit_time - record.execute_us)
        payload = encode_entries(batch)
        # the log's internal replication shows up as a fixed delivery delay
        for peer in self.pipeline.peers:
            self.send(
                peer.node_id, EovBlockMsg(payload), extra_delay=self.pipeline.cm.net_latency_mean
            )
        if self.pending:
            self.token += 1
            self.set_timer(self.pipeline.cm.block_timeout, OrderTimer(self.token))


class EovPeer(PeerNode):
    def __init__(self, node_id, pipeline):
        super().__init__(node_id, pipeline)
        self.register("eov", self.handle_eov)
        self.register("ord", self.handle_ordering)
        self.consensus = None
        self.pending = []  # consensus ordering mode only
        self.timer_token = 0

    def handle_eov(self, msg) -> int:
        if isinstance(msg, EndorseReq):
            self.to_worker(EndorseTask(msg.txn_id))
        elif isinstance(msg, EovBlockMsg):
            self.to_worker(ValidateTask(msg.payload))
        return 0

    # -- consensus-mode block formation (leader only) -------------------------------

    def handle_ordering(self, msg) -> int:
        if isinstance(msg, OrderRequest):
            self.pending.append((msg.txn_id, msg.reads))
            if len(self.pending) == 1:
                self.timer_token += 1
                self.set_timer(self.pipeline.cm.block_timeout, OrderTimer(self.timer_token))
            self.maybe_propose()
        elif isinstance(msg, OrderTimer):
            if msg.token == self.timer_token and self.pending:
                self.maybe_propose(force=True)
        return 0

    def maybe_propose(self, force: bool = False) -> None:
        if self.consensus is None or not self.consensus.is_leader():
            return
        limit = self.pipeline.cm.block_size_limit
        if len(self.pending) < limit and not force:
            return
        batch, self.pending = self.pending[:limit], self.pending[limit:]
        for txn_id, _ in batch:
            record = self.pipeline.records[txn_id]
            record.order_time = self.now
            record.order_us = max(0, self.now - record.submit_time - record.execute_us)
        self.consensus.propose(encode_entries(batch))


class EovWorker(WorkerNode):
    def __init__(self, peer):
        super().__init__(peer)
        self.register("eovx", self.handle)

    def handle(self, msg) -> int:
        if isinstance(msg, EndorseTask):
            self.endorse(msg.txn_id)
        elif isinstance(msg, ValidateTask):
            self.validate_block(msg.payload)
        return 0

    def endorse(self, txn_id: int) -> None:
        """Simulate against this peer's committed state; no state mutation."""
        record = self.pipeline.records[txn_id]
        txn = record.txn
        self.charge(self.pipeline.exec_cost(txn))
        reads = tuple(sorted((key, self.state.version(key)) for key, _ in txn.read_set))
        self.send("clients", EndorseResp(txn_id, self.peer.node_id, reads))

    def validate_block(self, payload: bytes) -> None:
        entries = decode_entries(payload)
        observer = self.peer.node_id == self.pipeline.observer_id
        cm = self.pipeline.cm
        cumulative = 0
        block_log = []
        for txn_id, reads in entries:
            record = self.pipeline.records[txn_id]
            txn = record.txn
            cost = cm.sig_verify_time
            read_versions = dict(reads)
            if txn.app_abort:
                outcome = TxnOutcome.ABORTED_APPLICATION
            else:
                outcome = occ_validate(read_versions, (), self.state)
            if outcome is TxnOutcome.COMMITTED and txn.write_set:
                _, hops, hbytes = self.state.apply_batch(txn.write_set)
                cost += cm.exec_time_per_op * len(txn.write_set)
                cost += self.hash_cost(hops, hbytes)
            self.charge(cost)
            cumulative += cost
            block_log.append((txn_id, outcome))
            if observer:
                self.pipeline.sig_time_total += cm.sig_verify_time
                self.pipeline.validate_time_total += cost
                record.read_versions = read_versions
                done_at = self.now + cumulative
                record.validate_us = done_at - record.order_time
                record.settle(outcome, done_at)
                self.send("clients", EovDone(txn_id))
        if self.state.ledger is not None:
            block = Block(
                height=len(self.state.ledger.blocks),
                parent_digest=self.state.ledger.tip_digest,
                txn_list=tuple(self.pipeline.records[i].txn for i, _ in entries),
                proposer=0,
                state_root=self.state.index_root() if self.state.index else None,
            )
            _, size = self.state.ledger.append(block)
            self.charge(self.hash_cost(1, size))
        if observer:
            self.pipeline.block_log.append(tuple(block_log))


class ExecuteOrderValidatePipeline(PipelineBase):
    def __init__(
        self,
        cfg,
        spec,
        arrival: Arrival,
        seed: int,
        endorsement_k: int = 0,  # matching endorsements required; 0 = all peers
        trace: bool = False,
    ):
        super().__init__(cfg, spec, arrival, seed, trace)
        self.build_peers(EovPeer, EovWorker)
        self.endorsement_k = endorsement_k or cfg.node_count
        if not 1 <= self.endorsement_k <= cfg.node_count:
            raise ValueError("endorsement_k must be in 1..node_count")
        self.sig_time_total = 0
        self.validate_time_total = 0
        self.block_log = []
        self.orderer = None
        self.endorse_timeout = 200 * self.cm.net_latency_mean
        self._inflight: Dict[int, dict] = {}
        if cfg.replication_approach is ReplicationApproach.CONSENSUS:
            comps = self.attach_consensus(
                lambda peer: (
                    lambda idx, payload, p=peer: p.to_worker(ValidateTask(payload))
                )
            )
            for peer in self.peers:
                peer.consensus = comps[peer.node_id]
        else:
            self.orderer = EovOrderer(self)
            self.sim.add_node(self.orderer)
        self.preload()
        self.schedule_arrivals()

    def exec_cost(self, txn) -> int:
        return self.cm.exec_time_per_op * max(1, txn.op_count)

    # -- the client side -----------------------------------------------------------

    def begin_txn(self, txn_id: int) -> None:
        record = self.records[txn_id]
        record.submit_time = self.sim.now
        self._inflight[txn_id] = {}
        for peer in self.peers:
            self.clients.send(peer.node_id, EndorseReq(txn_id))
        self.clients.set_timer(self.endorse_timeout, EndorseTimeout(txn_id))

    def client_message(self, msg) -> None:
        if isinstance(msg, EndorseResp):
            self._on_endorse_resp(msg)
        elif isinstance(msg, EndorseTimeout):
            if msg.txn_id in self._inflight:
                del self._inflight[msg.txn_id]
                self.mark_dropped(self.records[msg.txn_id])
        elif isinstance(msg, EovDone):
            self.txn_finished(self.records[msg.txn_id])
        elif isinstance(msg, RetryOrder):
            self._send_for_ordering(msg.txn_id, msg.reads)

    def _send_for_ordering(self, txn_id: int, reads: tuple) -> None:
        if self.orderer is not None:
            self.clients.send("orderer", OrderRequest(txn_id, reads))
            return
        leader = next(
            (p for p in self.peers if p.consensus and p.consensus.is_leader()), None
        )
        if leader is None:
            self.clients.set_timer(2_000, RetryOrder(txn_id, reads))
        else:
            self.clients.send(leader.node_id, OrderRequest(txn_id, reads))

    def _on_endorse_resp(self, msg: EndorseResp) -> None:
        responses = self._inflight.get(msg.txn_id)
        if responses is None:
            return  # already settled or dropped
        record = self.records[msg.txn_id]
        responses[msg.peer] = msg.reads
        first = next(iter(responses.values()))
        if msg.reads != first:
            # peers answered from different committed states
            del self._inflight[msg.txn_id]
            record.settle(TxnOutcome.ABORTED_INCONSISTENT_READ, self.sim.now)
            self.txn_finished(record)
            return
        if len(responses) < self.endorsement_k:
            return
        del self._inflight[msg.txn_id]
        record.execute_us = self.sim.now - record.submit_time
        record.read_versions = dict(first)
        self._send_for_ordering(msg.txn_id, first)
