"""Versioned key-value store: the committed state beneath every pipeline."""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Tuple


class VersionedKV:
    """Map of key -> (value, version); versions count committed writes per key.

    Writes land only through ``put_batch`` at commit points, so readers never
    observe uncommitted values.  A batch is atomic and last-write-wins inside
    itself: each touched key's version moves by exactly one.
    """

    def __init__(self):
        self._data: Dict[bytes, Tuple[bytes, int]] = {}

    def get(self, key: bytes) -> Optional[Tuple[bytes, int]]:
        return self._data.get(key)

    def version(self, key: bytes) -> int:
        entry = self._data.get(key)
        return entry[1] if entry else 0

    def put_batch(self, writes: Iterable[Tuple[bytes, bytes]]) -> Dict[bytes, int]:
        """Apply writes atomically; returns the new version per touched key."""
        last = {}
        for key, value in writes:
            last[key] = value
        versions = {}
        for key, value in last.items():
            version = self.version(key) + 1
            self._data[key] = (value, version)
            versions[key] = version
        return versions

    def items(self):
        return self._data.items()

    def __len__(self) -> int:
        return len(self._data)

    def raw_bytes(self) -> int:
        return sum(len(k) + len(v) for k, (v, _) in self._data.items())

    def state_fingerprint(self) -> bytes:
        """Order-independent digest of the committed contents, for node comparison."""
        from ..core.encoding import Writer, digest

        w = Writer()
        for key in sorted(self._data):
            value, version = self._data[key]
            w.bytes(key).bytes(value).u64(version)
        return digest(w.getvalue())
