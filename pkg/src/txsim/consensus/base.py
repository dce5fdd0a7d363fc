"""Host nodes and the component protocol they dispatch to.

A sim node can run several protocols at once (a peer validates blocks and
participates in consensus; a coordinator replica runs PBFT and a 2PC state
machine).  Components register a message-kind prefix on their host and get
all matching traffic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from ..simnet import Node, payload_kind


class ProtocolHost(Node):
    def __init__(self, node_id):
        super().__init__(node_id)
        self._handlers = {}

    def register(self, prefix: str, handler) -> None:
        if prefix in self._handlers:
            raise ValueError(f"prefix {prefix!r} already registered on {self.node_id!r}")
        self._handlers[prefix] = handler

    def on_message(self, msg) -> int:
        kind = payload_kind(msg)
        prefix = kind.split(":", 1)[0]
        handler = self._handlers.get(prefix)
        if handler is None:
            raise ValueError(f"node {self.node_id!r} has no handler for {kind!r}")
        return handler(msg) or 0


class Component:
    """A protocol state machine living on a ProtocolHost."""

    prefix = ""

    def __init__(self):
        self.host: ProtocolHost = None

    def attach(self, host: ProtocolHost) -> "Component":
        self.host = host
        host.register(self.prefix, self.handle)
        return self

    @property
    def node_id(self):
        return self.host.node_id

    @property
    def now(self) -> int:
        return self.host.sim.now

    def send(self, dst, payload, extra_delay: int = 0) -> None:
        self.host.send(dst, payload, extra_delay)

    def set_timer(self, delay: int, payload) -> None:
        self.host.set_timer(delay, payload)

    def handle(self, msg) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class ReplicaState:
    """Inspectable snapshot of one replica's ordered log."""

    node_id: object
    term: int
    role: str
    log: Tuple[Tuple[int, int, bytes], ...]  # (index, term/view, payload digest)
    commit_index: int

    def committed_digests(self) -> Tuple[bytes, ...]:
        return tuple(d for (_, _, d) in self.log[: self.commit_index])


def messages_per_commit(sim, prefix: str, committed: int) -> float:
    """Mean delivered protocol messages per committed entry, from the sim counters."""
    if committed <= 0:
        return 0.0
    total = sum(
        count
        for kind, count in sim.delivered_counts.items()
        if kind.split(":", 1)[0] == prefix and not kind.endswith("timer")
    )
    return total / committed
