"""Counts digest work so pipelines can charge virtual time for it."""

from __future__ import annotations


class HashMeter:
    def __init__(self):
        self.ops = 0
        self.bytes = 0

    def count(self, nbytes: int) -> None:
        self.ops += 1
        self.bytes += nbytes

    def snapshot(self) -> tuple:
        return (self.ops, self.bytes)

    def delta_since(self, snap: tuple) -> tuple:
        return (self.ops - snap[0], self.bytes - snap[1])
