"""Deterministic simulator for the design space of distributed transactional systems.

The design space has four axes: what gets replicated (whole transactions vs
storage operations), how replicas stay consistent (consensus, shared log,
primary-backup) and under which failure model (crash vs Byzantine), how
transactions interleave (serial, order-execute, execute-order-validate,
optimistic, locking), how state is stored (plain, Merkle Patricia Trie,
Merkle bucket tree, with or without a hash-chained ledger), and how data is
sharded (none, trusted 2PC, BFT-coordinated 2PC).

Any point in that space is described by a ``DesignConfig``, executed against a
synthetic workload on a discrete-event network, and measured.  All runs are
deterministic given (config, workload, seed).
"""

__version__ = "0.1.0"
