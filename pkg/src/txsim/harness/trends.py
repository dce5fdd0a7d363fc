"""First-class trend checks: the qualitative orderings the simulator must show.

Each check runs the two cells it compares and returns (holds, details), so a
test or a report can assert the trend and show the numbers that back it.
"""

from __future__ import annotations

import dataclasses

from ..core.types import DesignConfig, IndexKind
from ..pipeline import Arrival
from ..workload import WorkloadSpec
from .experiment import run_experiment


def _pair(cfg_a, spec_a, cfg_b, spec_b, arrival, seed):
    a = run_experiment(cfg_a, spec_a, arrival, seed)
    b = run_experiment(cfg_b, spec_b, arrival, seed)
    return a, b


def skew_slows_throughput(
    cfg: DesignConfig, spec: WorkloadSpec, arrival: Arrival, seed: int = 0
) -> tuple:
    """Contention-sensitive pipelines lose throughput from theta 0 to 1."""
    uniform = dataclasses.replace(spec, theta=0.0)
    skewed = dataclasses.replace(spec, theta=1.0)
    a, b = _pair(cfg, uniform, cfg, skewed, arrival, seed)
    return b.throughput_tps < a.throughput_tps, {
        "theta0_tps": a.throughput_tps,
        "theta1_tps": b.throughput_tps,
    }


def ops_slow_throughput(
    cfg: DesignConfig, spec: WorkloadSpec, arrival: Arrival, seed: int = 0
) -> tuple:
    """Conflict-prone pipelines lose throughput from 1 to 10 ops per txn."""
    one = dataclasses.replace(spec, ops_per_txn=1)
    ten = dataclasses.replace(spec, ops_per_txn=10)
    a, b = _pair(cfg, one, cfg, ten, arrival, seed)
    return b.throughput_tps < a.throughput_tps, {
        "ops1_tps": a.throughput_tps,
        "ops10_tps": b.throughput_tps,
    }


def authenticated_ledger_slows_large_records(
    cfg: DesignConfig, spec: WorkloadSpec, arrival: Arrival, seed: int = 0
) -> tuple:
    """At 5000-byte records, ledger+MPT throughput sits below plain storage."""
    big = dataclasses.replace(spec, record_size_bytes=5000)
    heavy = dataclasses.replace(cfg, ledger_enabled=True, index=IndexKind.MPT)
    plain = dataclasses.replace(cfg, ledger_enabled=False, index=IndexKind.PLAIN)
    a, b = _pair(heavy, big, plain, big, arrival, seed)
    return a.throughput_tps < b.throughput_tps, {
        "ledger_mpt_tps": a.throughput_tps,
        "plain_tps": b.throughput_tps,
    }
