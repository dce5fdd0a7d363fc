"""Merkle Patricia Trie: nibble-keyed authenticated index.

Three node kinds (branch, extension, leaf) over 4-bit key steps; every node
is stored content-addressed under the digest of its canonical encoding, so
the root digest is determined solely by the key-value set.  The access path
from root to leaf doubles as the membership proof.

The node encoding is this package's own (branch children are stored sparse,
prefixed by a presence bitmap); it is canonical and injective but not wire
compatible with any production system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..core.encoding import DIGEST_SIZE, Reader, Writer, digest
from .meter import HashMeter

EMPTY_ROOT = digest(b"")  # documented constant for the empty trie

_LEAF, _EXTENSION, _BRANCH = 0, 1, 2


def key_nibbles(key: bytes) -> Tuple[int, ...]:
    out = []
    for byte in key:
        out.append(byte >> 4)
        out.append(byte & 0x0F)
    return tuple(out)


def _encode_nibbles(w: Writer, nibbles) -> None:
    w.u32(len(nibbles))
    w.raw(bytes(nibbles))


def _decode_nibbles(r: Reader) -> Tuple[int, ...]:
    return tuple(r.raw(r.u32()))


@dataclass
class Leaf:
    suffix: Tuple[int, ...]
    value: bytes


@dataclass
class Extension:
    path: Tuple[int, ...]  # at least one nibble
    child: bytes


@dataclass
class Branch:
    children: List[Optional[bytes]]  # 16 slots of child digests
    value: Optional[bytes]


def encode_node(node) -> bytes:
    w = Writer()
    if isinstance(node, Leaf):
        w.u8(_LEAF)
        _encode_nibbles(w, node.suffix)
        w.bytes(node.value)
    elif isinstance(node, Extension):
        w.u8(_EXTENSION)
        _encode_nibbles(w, node.path)
        w.raw(node.child)
    else:
        w.u8(_BRANCH)
        mask = 0
        for i, child in enumerate(node.children):
            if child is not None:
                mask |= 1 << i
        w.u32(mask)
        for child in node.children:
            if child is not None:
                w.raw(child)
        if node.value is None:
            w.u8(0)
        else:
            w.u8(1)
            w.bytes(node.value)
    return w.getvalue()


def decode_node(data: bytes):
    r = Reader(data)
    tag = r.u8()
    if tag == _LEAF:
        suffix = _decode_nibbles(r)
        return Leaf(suffix, r.bytes())
    if tag == _EXTENSION:
        path = _decode_nibbles(r)
        return Extension(path, r.raw(DIGEST_SIZE))
    if tag == _BRANCH:
        mask = r.u32()
        children: List[Optional[bytes]] = [None] * 16
        for i in range(16):
            if mask & (1 << i):
                children[i] = r.raw(DIGEST_SIZE)
        value = r.bytes() if r.u8() else None
        return Branch(children, value)
    raise ValueError(f"unknown node tag {tag}")


@dataclass
class MptProof:
    """Encoded nodes along the access path, root first."""

    nodes: Tuple[bytes, ...]

    @property
    def path_length(self) -> int:
        return len(self.nodes)


def _common_prefix(a, b) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


class MerklePatriciaTrie:
    def __init__(self, meter: Optional[HashMeter] = None):
        self._nodes: Dict[bytes, bytes] = {}  # digest -> encoding
        self.root = EMPTY_ROOT
        self.meter = meter or HashMeter()

    # -- node store ------------------------------------------------------------

    def _store(self, node) -> bytes:
        enc = encode_node(node)
        d = digest(enc)
        self._nodes[d] = enc
        self.meter.count(len(enc))
        return d

    def _load(self, d: bytes):
        return decode_node(self._nodes[d])

    # -- queries ---------------------------------------------------------------

    def get(self, key: bytes) -> Optional[bytes]:
        if self.root == EMPTY_ROOT:
            return None
        node_digest = self.root
        nibbles = key_nibbles(key)
        while True:
            node = self._load(node_digest)
            if isinstance(node, Leaf):
                return node.value if node.suffix == nibbles else None
            if isinstance(node, Extension):
                if nibbles[: len(node.path)] != node.path:
                    return None
                nibbles = nibbles[len(node.path) :]
                node_digest = node.child
            else:
                if not nibbles:
                    return node.value
                child = node.children[nibbles[0]]
                if child is None:
                    return None
                node_digest = child
                nibbles = nibbles[1:]

    def put(self, key: bytes, value: bytes) -> bytes:
        nibbles = key_nibbles(key)
        if self.root == EMPTY_ROOT:
            self.root = self._store(Leaf(nibbles, value))
        else:
            self.root = self._insert(self.root, nibbles, value)
        return self.root

    def put_batch(self, writes) -> bytes:
        for key, value in writes:
            self.put(key, value)
        return self.root

    # -- insertion ---------------------------------------------------------------

    def _insert(self, node_digest: bytes, nibbles: Tuple[int, ...], value: bytes) -> bytes:
        node = self._load(node_digest)
        if isinstance(node, Leaf):
            return self._insert_at_leaf(node, nibbles, value)
        if isinstance(node, Extension):
            return self._insert_at_extension(node, nibbles, value)
        return self._insert_at_branch(node, nibbles, value)

    def _insert_at_leaf(self, node: Leaf, nibbles, value: bytes) -> bytes:
        if node.suffix == nibbles:
            return self._store(Leaf(nibbles, value))
        common = _common_prefix(node.suffix, nibbles)
        branch = Branch([None] * 16, None)
        for suffix, val in ((node.suffix[common:], node.value), (nibbles[common:], value)):
            if suffix:
                branch.children[suffix[0]] = self._store(Leaf(suffix[1:], val))
            else:
                branch.value = val
        out = self._store(branch)
        if common:
            out = self._store(Extension(nibbles[:common], out))
        return out

    def _insert_at_extension(self, node: Extension, nibbles, value: bytes) -> bytes:
        common = _common_prefix(node.path, nibbles)
        if common == len(node.path):
            child = self._insert(node.child, nibbles[common:], value)
            return self._store(Extension(node.path, child))
        # the extension splits at `common`
        branch = Branch([None] * 16, None)
        ext_rest = node.path[common:]
        if len(ext_rest) == 1:
            branch.children[ext_rest[0]] = node.child
        else:
            branch.children[ext_rest[0]] = self._store(Extension(ext_rest[1:], node.child))
        new_rest = nibbles[common:]
        if new_rest:
            branch.children[new_rest[0]] = self._store(Leaf(new_rest[1:], value))
        else:
            branch.value = value
        out = self._store(branch)
        if common:
            out = self._store(Extension(nibbles[:common], out))
        return out

    def _insert_at_branch(self, node: Branch, nibbles, value: bytes) -> bytes:
        children = list(node.children)
        if not nibbles:
            return self._store(Branch(children, value))
        head, rest = nibbles[0], nibbles[1:]
        if children[head] is None:
            children[head] = self._store(Leaf(rest, value))
        else:
            children[head] = self._insert(children[head], rest, value)
        return self._store(Branch(children, node.value))

    # -- proofs --------------------------------------------------------------------

    def prove(self, key: bytes) -> MptProof:
        if self.get(key) is None:
            raise KeyError(f"no committed value for {key!r}")
        path: List[bytes] = []
        node_digest = self.root
        nibbles = key_nibbles(key)
        while True:
            enc = self._nodes[node_digest]
            path.append(enc)
            node = decode_node(enc)
            if isinstance(node, Leaf):
                return MptProof(tuple(path))
            if isinstance(node, Extension):
                nibbles = nibbles[len(node.path) :]
                node_digest = node.child
            else:
                if not nibbles:
                    return MptProof(tuple(path))
                node_digest = node.children[nibbles[0]]
                nibbles = nibbles[1:]

    # -- size accounting ---------------------------------------------------------------

    def reachable_bytes(self) -> int:
        """Total encoded size of the nodes reachable from the current root."""
        if self.root == EMPTY_ROOT:
            return 0
        total = 0
        stack = [self.root]
        while stack:
            enc = self._nodes[stack.pop()]
            total += len(enc)
            node = decode_node(enc)
            if isinstance(node, Extension):
                stack.append(node.child)
            elif isinstance(node, Branch):
                stack.extend(c for c in node.children if c is not None)
        return total

    def max_path_nibbles(self) -> int:
        """Deepest root-to-leaf path measured in nibble steps."""
        if self.root == EMPTY_ROOT:
            return 0
        best = 0
        stack = [(self.root, 0)]
        while stack:
            d, depth = stack.pop()
            node = self._load(d)
            if isinstance(node, Leaf):
                best = max(best, depth + len(node.suffix))
            elif isinstance(node, Extension):
                stack.append((node.child, depth + len(node.path)))
            else:
                best = max(best, depth)
                for child in node.children:
                    if child is not None:
                        stack.append((child, depth + 1))
        return best


def verify(root: bytes, key: bytes, value: bytes, proof: MptProof) -> bool:
    """Pure check that (key, value) is committed under ``root``; no store access."""
    if not proof.nodes:
        return False
    expected = root
    nibbles = key_nibbles(key)
    for i, enc in enumerate(proof.nodes):
        if digest(enc) != expected:
            return False
        try:
            node = decode_node(enc)
        except (ValueError, IndexError):
            return False
        last = i == len(proof.nodes) - 1
        if isinstance(node, Leaf):
            return last and node.suffix == nibbles and node.value == value
        if isinstance(node, Extension):
            if last or nibbles[: len(node.path)] != node.path:
                return False
            nibbles = nibbles[len(node.path) :]
            expected = node.child
        else:
            if not nibbles:
                return last and node.value == value
            if last:
                return False
            child = node.children[nibbles[0]]
            if child is None:
                return False
            expected = child
            nibbles = nibbles[1:]
    return False
