"""Shared domain types, design-space configuration, canonical bytes, seeded RNG."""

from .encoding import (
    DIGEST_SIZE,
    Reader,
    Writer,
    decode_block,
    decode_transaction,
    digest,
    encode_block,
    encode_transaction,
)
from .rng import seeded_rng
from .types import (
    ConcurrencyMode,
    Block,
    CostModel,
    DesignConfig,
    FailureModel,
    IndexKind,
    ReplicationApproach,
    ReplicationModel,
    ShardingMode,
    Transaction,
    TxnOutcome,
    validate_config,
)
from .configio import config_from_file, config_from_text, config_to_dict

__all__ = [
    "DIGEST_SIZE",
    "Block",
    "ConcurrencyMode",
    "CostModel",
    "DesignConfig",
    "FailureModel",
    "IndexKind",
    "Reader",
    "ReplicationApproach",
    "ReplicationModel",
    "ShardingMode",
    "Transaction",
    "TxnOutcome",
    "Writer",
    "config_from_file",
    "config_from_text",
    "config_to_dict",
    "decode_block",
    "decode_transaction",
    "digest",
    "encode_block",
    "encode_transaction",
    "seeded_rng",
    "validate_config",
]
