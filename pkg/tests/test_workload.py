"""Workload generators: Zipfian distribution, YCSB streams, Smallbank."""

import math

import pytest

from txsim.core import seeded_rng
from txsim.workload import (
    WorkloadKind,
    WorkloadSpec,
    ZipfianSampler,
    dump_stream,
    gen_smallbank,
    gen_ycsb,
    generate,
    initial_state,
    scramble_rank,
    workload_from_text,
    zipfian_sample,
)
from txsim.workload.smallbank import (
    INITIAL_CHECKING,
    INITIAL_SAVINGS,
    decode_balance,
)

# chi-squared critical values at the 0.1% significance level (upper tail
# 0.999 quantile), standard table values for the degrees of freedom we use
CHI2_CRIT = {9: 27.877165, 99: 148.230359, 999: 1142.847984}


class TestZipfianDistribution:
    @pytest.mark.parametrize("n", [10, 100, 1000])
    @pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
    def test_goodness_of_fit(self, n, theta):
        draws = 10**6
        sampler = ZipfianSampler(n, theta)
        rng = seeded_rng(2024, f"gof-{n}-{theta}")
        counts = [0] * (n + 1)
        for _ in range(draws):
            counts[sampler.sample(rng)] += 1
        norm = sum(1.0 / j**theta for j in range(1, n + 1))
        stat = 0.0
        for i in range(1, n + 1):
            expected = draws * (1.0 / i**theta) / norm
            stat += (counts[i] - expected) ** 2 / expected
        assert stat < CHI2_CRIT[n - 1], f"chi2={stat:.1f} for n={n}, theta={theta}"

    def test_exact_pmf_three_ranks_theta_one(self):
        # normalizer 1 + 1/2 + 1/3 = 11/6, so p = (6/11, 3/11, 2/11)
        sampler = ZipfianSampler(3, 1.0)
        assert abs(sampler.pmf(1) - 6 / 11) < 1e-12
        assert abs(sampler.pmf(2) - 3 / 11) < 1e-12
        assert abs(sampler.pmf(3) - 2 / 11) < 1e-12
        draws = 10**5
        rng = seeded_rng(7, "pmf3")
        counts = [0] * 4
        for _ in range(draws):
            counts[sampler.sample(rng)] += 1
        for i, p in ((1, 6 / 11), (2, 3 / 11), (3, 2 / 11)):
            sigma = math.sqrt(draws * p * (1 - p))
            assert abs(counts[i] - draws * p) < 3 * sigma

    def test_theta_zero_is_uniform_within_three_sigma(self):
        n, draws = 20, 10**5
        sampler = ZipfianSampler(n, 0.0)
        rng = seeded_rng(8, "uniform")
        counts = [0] * (n + 1)
        for _ in range(draws):
            counts[sampler.sample(rng)] += 1
        p = 1.0 / n
        sigma = math.sqrt(draws * p * (1 - p))
        for i in range(1, n + 1):
            assert abs(counts[i] - draws * p) < 3 * sigma

    def test_single_rank(self):
        rng = seeded_rng(9, "one")
        assert all(zipfian_sample(1, 1.0, rng) == 1 for _ in range(100))

    def test_handles_million_ranks(self):
        sampler = ZipfianSampler(10**6, 0.99)
        rng = seeded_rng(10, "big")
        draws = [sampler.sample(rng) for _ in range(2000)]
        assert all(1 <= d <= 10**6 for d in draws)
        assert min(draws) < 100  # skew concentrates at the head

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            ZipfianSampler(0, 1.0)
        with pytest.raises(ValueError):
            ZipfianSampler(10, -0.5)


class TestScramble:
    @pytest.mark.parametrize("n", [10, 97, 1000, 4096])
    def test_is_a_permutation(self, n):
        assert sorted(scramble_rank(r, n) for r in range(1, n + 1)) == list(range(n))

    def test_adjacent_hot_ranks_scatter(self):
        n = 1000
        images = [scramble_rank(r, n) for r in (1, 2, 3)]
        gaps = [abs(a - b) for a, b in zip(images, images[1:])]
        assert min(gaps) > 10


class TestYcsb:
    def test_query_only_has_empty_write_sets(self):
        spec = WorkloadSpec(kind=WorkloadKind.YCSB_QUERY, txn_count=50, seed=3)
        txns = gen_ycsb(spec)
        assert len(txns) == 50
        assert all(txn.write_set == () for txn in txns)
        assert all(txn.read_set for txn in txns)

    def test_update_reads_then_writes_same_keys(self):
        spec = WorkloadSpec(kind=WorkloadKind.YCSB_UPDATE, txn_count=50, ops_per_txn=3, seed=4)
        for txn in gen_ycsb(spec):
            read_keys = [k for k, _ in txn.read_set]
            write_keys = [k for k, _ in txn.write_set]
            assert read_keys == write_keys
            assert len(set(read_keys)) == 3 == txn.op_count

    def test_constant_total_splits_record_size(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.YCSB_UPDATE,
            ops_per_txn=10,
            constant_total_bytes=1000,
            txn_count=5,
            seed=5,
        )
        assert spec.effective_record_size == 100
        for txn in gen_ycsb(spec):
            assert all(len(v) == 100 for _, v in txn.write_set)

    def test_mixed_respects_read_fraction(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.YCSB_MIXED, read_fraction=0.7, txn_count=2000, seed=6
        )
        txns = gen_ycsb(spec)
        reads = sum(1 for t in txns if not t.write_set)
        assert abs(reads / len(txns) - 0.7) < 0.05

    def test_stream_is_deterministic(self):
        spec = WorkloadSpec(kind=WorkloadKind.YCSB_UPDATE, theta=0.8, txn_count=200, seed=7)
        assert dump_stream(gen_ycsb(spec)) == dump_stream(gen_ycsb(spec))
        other = WorkloadSpec(kind=WorkloadKind.YCSB_UPDATE, theta=0.8, txn_count=200, seed=8)
        assert dump_stream(gen_ycsb(spec)) != dump_stream(gen_ycsb(other))

    def test_initial_state_covers_key_space(self):
        spec = WorkloadSpec(kind=WorkloadKind.YCSB_UPDATE, record_count=100, seed=1)
        writes = initial_state(spec)
        assert len(writes) == 100
        assert all(len(v) == spec.record_size_bytes for _, v in writes)


def _replay(spec, txns):
    state = dict(initial_state(spec))
    for txn in txns:
        if txn.app_abort:
            assert txn.write_set == ()
            continue
        for key, value in txn.write_set:
            state[key] = value
    return state


class TestSmallbank:
    def test_send_payment_touches_exactly_two_accounts(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.SMALLBANK,
            record_count=50,
            theta=1.0,
            txn_count=300,
            seed=11,
            smallbank_mix=(("send_payment", 1.0),),
        )
        for txn in gen_smallbank(spec):
            custs = {k[3:] for k, _ in txn.read_set}
            assert len(custs) == 2

    def test_deposits_never_abort_and_never_shrink_balances(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.SMALLBANK,
            record_count=20,
            txn_count=400,
            seed=12,
            smallbank_mix=(("deposit_checking", 1.0),),
        )
        txns = gen_smallbank(spec)
        assert all(not t.app_abort for t in txns)
        state = _replay(spec, txns)
        for key, value in state.items():
            if key.startswith(b"chk"):
                assert decode_balance(value) >= INITIAL_CHECKING

    def test_transfer_only_mix_conserves_total_money(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.SMALLBANK,
            record_count=30,
            theta=1.0,
            txn_count=1000,
            seed=13,
            smallbank_mix=(("send_payment", 0.6), ("amalgamate", 0.4)),
        )
        txns = gen_smallbank(spec)
        state = _replay(spec, txns)
        total = sum(decode_balance(v) for v in state.values())
        expected = spec.record_count * (INITIAL_CHECKING + INITIAL_SAVINGS)
        assert total == expected

    def test_constraint_violations_become_application_aborts(self):
        spec = WorkloadSpec(
            kind=WorkloadKind.SMALLBANK,
            record_count=5,
            theta=1.0,
            txn_count=2000,
            seed=14,
        )
        txns = gen_smallbank(spec)
        aborted = [t for t in txns if t.app_abort]
        assert aborted, "a long skewed run must hit insufficient funds"
        assert all(t.write_set == () for t in aborted)

    def test_uniform_mix_hits_all_procedures(self):
        spec = WorkloadSpec(kind=WorkloadKind.SMALLBANK, record_count=20, txn_count=600, seed=15)
        txns = gen_smallbank(spec)
        sizes = {len(t.read_set) for t in txns}
        assert {1, 2, 3}.issubset(sizes)

    def test_stream_is_deterministic(self):
        spec = WorkloadSpec(kind=WorkloadKind.SMALLBANK, record_count=20, txn_count=200, seed=16)
        assert dump_stream(gen_smallbank(spec)) == dump_stream(gen_smallbank(spec))


class TestSpecParsing:
    def test_ini_and_json_equivalent(self):
        ini = (
            "[workload]\nkind = ycsb_update\nrecord_count = 500\n"
            "record_size_bytes = 100\ntheta = 0.8\nops_per_txn = 2\n"
            "txn_count = 50\nseed = 9\n"
        )
        js = (
            '{"kind": "ycsb_update", "record_count": 500, "record_size_bytes": 100,'
            ' "theta": 0.8, "ops_per_txn": 2, "txn_count": 50, "seed": 9}'
        )
        assert workload_from_text(ini) == workload_from_text(js)

    def test_generate_dispatches_on_kind(self):
        spec = WorkloadSpec(kind=WorkloadKind.SMALLBANK, record_count=10, txn_count=10, seed=1)
        assert generate(spec)[0].read_set
        spec = WorkloadSpec(kind=WorkloadKind.YCSB_QUERY, txn_count=10, seed=1)
        assert generate(spec)[0].write_set == ()

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            WorkloadSpec(ops_per_txn=11)
        with pytest.raises(ValueError):
            WorkloadSpec(txn_count=0)
        with pytest.raises(ValueError):
            WorkloadSpec(theta=-1.0)
