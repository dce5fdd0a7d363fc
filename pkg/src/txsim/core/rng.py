"""Deterministic component-scoped random streams.

Every randomized piece of the simulator (workload keys, network latency,
election timeouts, ...) draws from its own stream derived from
``(seed, label)``.  Streams are independent, so adding or reordering draws in
one component never perturbs another, and the same seed reproduces the same
run bit for bit.
"""

from __future__ import annotations

import hashlib
import random


def seeded_rng(seed: int, label: str = "") -> random.Random:
    """Random stream for one component, derived from the run seed and a label."""
    material = hashlib.sha256(
        (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big") + label.encode("utf-8")
    ).digest()
    return random.Random(int.from_bytes(material, "big"))
