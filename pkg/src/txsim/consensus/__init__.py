"""Replication approaches as protocol state machines over the event simulator."""

from .quorum import QuorumSpec, QuorumError, quorum_size, bft_f_for
from .base import Component, ProtocolHost, ReplicaState, messages_per_commit
from .raft import RaftComponent, RaftTiming
from .pbft import PbftComponent, PbftTiming
from .sharedlog import SharedLogService, SharedLogClient
from .primarybackup import ChainReplica, chain_cluster

__all__ = [
    "ChainReplica",
    "Component",
    "PbftComponent",
    "PbftTiming",
    "ProtocolHost",
    "QuorumError",
    "QuorumSpec",
    "RaftComponent",
    "RaftTiming",
    "ReplicaState",
    "SharedLogClient",
    "SharedLogService",
    "bft_f_for",
    "chain_cluster",
    "messages_per_commit",
    "quorum_size",
]
