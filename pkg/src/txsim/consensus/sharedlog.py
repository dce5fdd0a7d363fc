"""External shared-log ordering service.

The log is trusted and non-Byzantine: one sequencer assigns dense sequence
numbers in arrival order and pushes entries to subscribers.  Its internal
replication shows up as a per-append processing cost plus an ack delay,
not as simulated replicas.  Consumers never load the sequencer, so append
throughput is flat in the number of consumers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from ..simnet import Node


@dataclass
class LogAppend:
    entry: bytes
    reply_to: object
    kind: str = field(default="slog:append", init=False)


@dataclass
class LogAppendAck:
    seq: int
    kind: str = field(default="slog:append_ack", init=False)


@dataclass
class LogRead:
    from_seq: int
    reply_to: object
    kind: str = field(default="slog:read", init=False)


@dataclass
class LogEntries:
    from_seq: int
    entries: tuple
    kind: str = field(default="slog:entries", init=False)


@dataclass
class LogDeliver:
    seq: int
    entry: bytes
    kind: str = field(default="slog:deliver", init=False)


class SharedLogService(Node):
    def __init__(self, node_id="shared_log", append_cost: int = 0, ack_delay: int = 0):
        super().__init__(node_id)
        self.append_cost = append_cost
        self.ack_delay = ack_delay
        self.entries: List[bytes] = []
        self.subscribers: List = []

    def subscribe(self, node_id) -> None:
        self.subscribers.append(node_id)

    def on_message(self, msg) -> int:
        if isinstance(msg, LogAppend):
            self.entries.append(msg.entry)
            seq = len(self.entries)
            if msg.reply_to is not None:
                self.send(msg.reply_to, LogAppendAck(seq), extra_delay=self.ack_delay)
            for sub in self.subscribers:
                self.send(sub, LogDeliver(seq, msg.entry), extra_delay=self.ack_delay)
            return self.append_cost
        if isinstance(msg, LogRead):
            slice_ = tuple(self.entries[msg.from_seq - 1 :])
            self.send(msg.reply_to, LogEntries(msg.from_seq, slice_))
            return 0
        raise ValueError(f"shared log cannot handle {msg!r}")


class SharedLogClient:
    """Convenience caller for nodes that append to / read from the log."""

    def __init__(self, host, log_id="shared_log"):
        self.host = host
        self.log_id = log_id

    def append(self, entry: bytes) -> None:
        self.host.send(self.log_id, LogAppend(entry, self.host.node_id))

    def read(self, from_seq: int) -> None:
        self.host.send(self.log_id, LogRead(from_seq, self.host.node_id))
