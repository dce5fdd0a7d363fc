"""Per-node state: versioned KV plus the configured authenticated index.

Commits flow through ``apply_batch``, which keeps KV and index in lockstep
and reports the digest work done so the caller can charge virtual time.
"""

from __future__ import annotations

from typing import Optional

from ..core.types import CostModel, IndexKind
from .kv import VersionedKV
from .ledger import LedgerStore
from .mbt import MerkleBucketTree
from .meter import HashMeter
from .mpt import MerklePatriciaTrie


class StateStore:
    def __init__(
        self,
        index: IndexKind = IndexKind.PLAIN,
        ledger_enabled: bool = False,
        bucket_count: int = 1000,
        fanout: int = 4,
    ):
        self.kv = VersionedKV()
        self.index_kind = index
        self.meter = HashMeter()
        if index is IndexKind.MPT:
            self.index = MerklePatriciaTrie(meter=self.meter)
        elif index is IndexKind.MBT:
            self.index = MerkleBucketTree(bucket_count, fanout, meter=self.meter)
        else:
            self.index = None
        self.ledger: Optional[LedgerStore] = LedgerStore() if ledger_enabled else None

    def get(self, key: bytes):
        return self.kv.get(key)

    def version(self, key: bytes) -> int:
        return self.kv.version(key)

    def apply_batch(self, writes) -> tuple:
        """Commit writes; returns (new versions, hash ops, hash bytes)."""
        snap = self.meter.snapshot()
        versions = self.kv.put_batch(writes)
        if self.index is not None:
            # the index sees the deduplicated batch, matching what committed
            self.index.put_batch(
                [(k, self.kv.get(k)[0]) for k in versions]
            )
        ops, nbytes = self.meter.delta_since(snap)
        return versions, ops, nbytes

    def index_root(self) -> bytes:
        if self.index is None:
            raise ValueError("index_root requires an authenticated index (mpt or mbt)")
        return self.index.root

    def hash_cost_of(self, cm: CostModel, ops: int, nbytes: int) -> int:
        return ops * cm.hash_time_base + int(nbytes * cm.hash_time_per_byte)

    def storage_breakdown(self) -> dict:
        records = len(self.kv)
        state_bytes = self.kv.raw_bytes()
        if self.index_kind is IndexKind.MPT:
            index_bytes = max(0, self.index.reachable_bytes() - state_bytes)
        elif self.index_kind is IndexKind.MBT:
            index_bytes = self.index.index_bytes()
        else:
            index_bytes = 0
        return {
            "records": records,
            "state_bytes": state_bytes,
            "block_bytes": self.ledger.block_bytes if self.ledger else 0,
            "index_overhead_bytes": index_bytes,
            "index_overhead_per_record": index_bytes / records if records else 0.0,
        }
