"""Authenticated storage: versioned KV, MPT, MBT, hash-chained ledger."""

import dataclasses
import hashlib
import random
import struct

import pytest

from txsim.authstore import (
    EMPTY_ROOT,
    GENESIS_PARENT,
    LedgerStore,
    MerkleBucketTree,
    MerklePatriciaTrie,
    StateStore,
    VersionedKV,
)
from txsim.authstore import mbt as mbt_mod
from txsim.authstore import mpt as mpt_mod
from txsim.authstore.ledger import LedgerError
from txsim.core import Block, IndexKind, Transaction, digest


class TestVersionedKV:
    def test_put_then_get_is_version_one(self):
        kv = VersionedKV()
        kv.put_batch([(b"k", b"v")])
        assert kv.get(b"k") == (b"v", 1)

    def test_absent_key(self):
        assert VersionedKV().get(b"nope") is None
        assert VersionedKV().version(b"nope") == 0

    def test_batch_is_last_write_wins_single_version_bump(self):
        kv = VersionedKV()
        versions = kv.put_batch([(b"k", b"v1"), (b"k", b"v2")])
        assert kv.get(b"k") == (b"v2", 1)
        assert versions == {b"k": 1}

    def test_versions_count_committed_batches(self):
        kv = VersionedKV()
        for i in range(5):
            kv.put_batch([(b"k", f"v{i}".encode())])
        assert kv.get(b"k") == (b"v4", 5)


class TestMpt:
    def test_empty_root_constant(self):
        assert MerklePatriciaTrie().root == EMPTY_ROOT == digest(b"")

    def test_single_leaf_root_matches_hand_computation(self):
        # Independent construction of the leaf encoding for {"a": "1"}:
        # tag 0, nibble count 2, nibbles (6, 1), value length 1, value "1".
        hand = (
            struct.pack(">B", 0)
            + struct.pack(">I", 2)
            + bytes([6, 1])
            + struct.pack(">I", 1)
            + b"1"
        )
        expected = hashlib.sha256(hand).digest()
        trie = MerklePatriciaTrie()
        trie.put(b"a", b"1")
        assert trie.root == expected

    def test_agrees_with_dict_oracle(self):
        rng = random.Random(21)
        trie = MerklePatriciaTrie()
        oracle = {}
        for _ in range(2000):
            key = f"k{rng.randint(0, 300):04d}".encode()
            value = rng.getrandbits(64).to_bytes(8, "big")
            trie.put(key, value)
            oracle[key] = value
        for key, value in oracle.items():
            assert trie.get(key) == value
        assert trie.get(b"absent") is None

    def test_root_is_insertion_order_independent(self):
        rng = random.Random(22)
        for _ in range(200):
            n = rng.randint(1, 12)
            items = {
                rng.getrandbits(48).to_bytes(6, "big"): rng.getrandbits(32).to_bytes(4, "big")
                for _ in range(n)
            }
            orders = [list(items.items()) for _ in range(2)]
            rng.shuffle(orders[0])
            rng.shuffle(orders[1])
            roots = set()
            for order in orders:
                trie = MerklePatriciaTrie()
                trie.put_batch(order)
                roots.add(trie.root)
            assert len(roots) == 1

    def test_proof_round_trip_and_tampering(self):
        rng = random.Random(23)
        trie = MerklePatriciaTrie()
        items = {}
        for i in range(50):
            key = f"key{i:02d}".encode()
            value = rng.getrandbits(64).to_bytes(8, "big")
            trie.put(key, value)
            items[key] = value
        for key, value in items.items():
            proof = trie.prove(key)
            assert mpt_mod.verify(trie.root, key, value, proof)
            # flip one byte of the value
            bad_value = bytes([value[0] ^ 1]) + value[1:]
            assert not mpt_mod.verify(trie.root, key, bad_value, proof)
        # flip one byte of the root
        key, value = next(iter(items.items()))
        proof = trie.prove(key)
        bad_root = bytes([trie.root[0] ^ 0x80]) + trie.root[1:]
        assert not mpt_mod.verify(bad_root, key, value, proof)
        # flip one byte inside the proof
        node = bytearray(proof.nodes[-1])
        node[-1] ^= 1
        tampered = mpt_mod.MptProof(proof.nodes[:-1] + (bytes(node),))
        assert not mpt_mod.verify(trie.root, key, value, tampered)

    def test_prove_absent_key_signals(self):
        trie = MerklePatriciaTrie()
        trie.put(b"here", b"x")
        with pytest.raises(KeyError):
            trie.prove(b"gone")

    def test_path_bound_for_16_byte_keys(self):
        rng = random.Random(24)
        trie = MerklePatriciaTrie()
        for _ in range(3000):
            trie.put(rng.getrandbits(128).to_bytes(16, "big"), b"v")
        # 16-byte keys are 32 nibbles; every internal node consumes >= 1
        assert trie.max_path_nibbles() <= 32

    def test_overwrite_changes_root_back_and_forth(self):
        trie = MerklePatriciaTrie()
        r1 = trie.put(b"k", b"v1")
        r2 = trie.put(b"k", b"v2")
        r3 = trie.put(b"k", b"v1")
        assert r1 != r2 and r1 == r3


class TestMbt:
    def test_default_depth_is_five(self):
        tree = MerkleBucketTree()
        assert tree.bucket_count == 1000 and tree.fanout == 4
        assert tree.depth == 5

    def test_root_is_insertion_order_independent(self):
        rng = random.Random(31)
        items = {
            f"key{i}".encode(): rng.getrandbits(32).to_bytes(4, "big") for i in range(200)
        }
        orders = [list(items.items()), list(items.items())]
        rng.shuffle(orders[0])
        rng.shuffle(orders[1])
        roots = set()
        for order in orders:
            tree = MerkleBucketTree()
            tree.put_batch(order)
            roots.add(tree.root)
        assert len(roots) == 1

    def test_one_write_recomputes_depth_plus_one_digests(self):
        tree = MerkleBucketTree()
        tree.put(b"warm", b"x")
        before = tree.meter.ops
        tree.put(b"key", b"value")
        assert tree.meter.ops - before == tree.depth + 1

    def test_proof_path_length_is_depth_plus_bucket_position(self):
        tree = MerkleBucketTree()
        rng = random.Random(32)
        keys = [f"key{i}".encode() for i in range(300)]
        for key in keys:
            tree.put(key, rng.getrandbits(32).to_bytes(4, "big"))
        for key in keys[:50]:
            proof = tree.prove(key)
            position = [k for k, _ in tree.buckets[proof.bucket_index]].index(key)
            assert proof.path_length == 5 + position

    def test_proof_round_trip_and_tampering(self):
        tree = MerkleBucketTree()
        rng = random.Random(33)
        items = {}
        for i in range(100):
            key = f"key{i}".encode()
            value = rng.getrandbits(64).to_bytes(8, "big")
            tree.put(key, value)
            items[key] = value
        for key, value in list(items.items())[:40]:
            proof = tree.prove(key)
            assert mbt_mod.verify(tree.root, key, value, proof)
            bad = bytes([value[0] ^ 4]) + value[1:]
            assert not mbt_mod.verify(tree.root, key, bad, proof)
            bad_root = tree.root[:-1] + bytes([tree.root[-1] ^ 1])
            assert not mbt_mod.verify(bad_root, key, value, proof)
        # tamper a sibling digest inside the proof
        key, value = next(iter(items.items()))
        proof = tree.prove(key)
        pos, sibs = proof.path[0]
        if sibs:
            bad_sib = bytes([sibs[0][0] ^ 1]) + sibs[0][1:]
            bad_path = ((pos, (bad_sib,) + sibs[1:]),) + proof.path[1:]
            tampered = dataclasses.replace(proof, path=bad_path)
            assert not mbt_mod.verify(tree.root, key, value, tampered)

    def test_updates_are_in_place(self):
        tree = MerkleBucketTree()
        tree.put(b"k", b"v1")
        r1 = tree.root
        tree.put(b"k", b"v2")
        assert tree.root != r1
        assert tree.get(b"k") == b"v2"
        assert sum(len(b) for b in tree.buckets) == 1


def _block(height, parent, n_txns=2, rng=None):
    rng = rng or random.Random(height)
    txns = tuple(
        Transaction(
            id=height * 100 + i,
            write_set=((f"k{i}".encode(), rng.getrandbits(32).to_bytes(4, "big")),),
        )
        for i in range(n_txns)
    )
    return Block(height=height, parent_digest=parent, txn_list=txns, proposer=0)


class TestLedger:
    def test_genesis_then_next_block_verifies(self):
        ledger = LedgerStore()
        b0 = _block(0, GENESIS_PARENT)
        d0, _ = ledger.append(b0)
        ledger.append(_block(1, d0))
        assert ledger.verify_chain() is None

    def test_wrong_parent_rejected(self):
        ledger = LedgerStore()
        ledger.append(_block(0, GENESIS_PARENT))
        with pytest.raises(LedgerError, match="parent digest"):
            ledger.append(_block(1, digest(b"wrong")))

    def test_mutating_block_breaks_chain_at_next_height(self):
        ledger = LedgerStore()
        d = GENESIS_PARENT
        for h in range(3):
            d, _ = ledger.append(_block(h, d))
        mutated = dataclasses.replace(ledger.blocks[1], proposer=9)
        ledger.blocks[1] = mutated
        assert ledger.verify_chain() == 2

    def test_tip_mutation_detected(self):
        ledger = LedgerStore()
        d = GENESIS_PARENT
        for h in range(3):
            d, _ = ledger.append(_block(h, d))
        ledger.blocks[2] = dataclasses.replace(ledger.blocks[2], proposer=9)
        assert ledger.verify_chain() == 2

    def test_hundred_random_blocks_verify(self):
        rng = random.Random(44)
        ledger = LedgerStore()
        d = GENESIS_PARENT
        for h in range(100):
            d, _ = ledger.append(_block(h, d, n_txns=rng.randint(0, 4), rng=rng))
        assert ledger.verify_chain() is None
        assert ledger.block_bytes > 0

    def test_every_single_byte_mutation_is_located(self):
        ledger = LedgerStore()
        d = GENESIS_PARENT
        for h in range(5):
            d, _ = ledger.append(_block(h, d))
        # corrupt one value byte in each block in turn
        for h in range(5):
            original = ledger.blocks[h]
            txn = original.txn_list[0]
            key, value = txn.write_set[0]
            bad_txn = txn.evolve(write_set=((key, bytes([value[0] ^ 1]) + value[1:]),))
            ledger.blocks[h] = dataclasses.replace(
                original, txn_list=(bad_txn,) + original.txn_list[1:]
            )
            broken = ledger.verify_chain()
            assert broken is not None and broken in (h, h + 1)
            ledger.blocks[h] = original
        assert ledger.verify_chain() is None


class TestStateStore:
    def test_apply_batch_updates_kv_and_root(self):
        store = StateStore(index=IndexKind.MPT)
        versions, ops, nbytes = store.apply_batch([(b"a", b"1"), (b"b", b"2")])
        assert versions == {b"a": 1, b"b": 1}
        assert ops > 0 and nbytes > 0
        root_before = store.index_root()
        store.apply_batch([(b"a", b"3")])
        assert store.index_root() != root_before

    def test_index_root_requires_authenticated_index(self):
        store = StateStore(index=IndexKind.PLAIN)
        with pytest.raises(ValueError, match="authenticated index"):
            store.index_root()

    def test_breakdown_ledger_disabled_has_zero_block_bytes(self):
        store = StateStore(index=IndexKind.PLAIN, ledger_enabled=False)
        store.apply_batch([(b"a", b"x" * 100)])
        report = store.storage_breakdown()
        assert report["block_bytes"] == 0
        assert report["state_bytes"] == 101
        assert report["index_overhead_per_record"] == 0.0

    def test_mbt_overhead_below_mpt_overhead(self):
        rng = random.Random(55)
        writes = [
            (f"rec{i:06d}".encode()[:16].ljust(16, b"0"), rng.getrandbits(64).to_bytes(8, "big"))
            for i in range(2000)
        ]
        mpt_store = StateStore(index=IndexKind.MPT)
        mbt_store = StateStore(index=IndexKind.MBT)
        mpt_store.apply_batch(writes)
        mbt_store.apply_batch(writes)
        mpt_overhead = mpt_store.storage_breakdown()["index_overhead_per_record"]
        mbt_overhead = mbt_store.storage_breakdown()["index_overhead_per_record"]
        assert mbt_overhead < mpt_overhead
