"""Bloom filter used to skip index buckets without decompressing rawdata.

A query against the filter answers "definitely absent" or "maybe present":
false positives happen at a tunable rate, false negatives never.
"""

from __future__ import annotations

import hashlib
import math


class BloomFilter:
    def __init__(self, m: int, k: int):
        if m <= 0 or k <= 0:
            raise ValueError("m and k must be positive")
        self.m = m
        self.k = k
        self.inserted = 0
        self.bits = bytearray((m + 7) // 8)

    @classmethod
    def for_capacity(cls, n: int, fp_rate: float = 0.01) -> "BloomFilter":
        """Size the filter for n insertions at the target false-positive rate."""
        n = max(n, 1)
        m = math.ceil(-n * math.log(fp_rate) / math.log(2) ** 2)
        k = math.ceil(m / n * math.log(2))
        return cls(m, k)

    def _positions(self, term: str):
        # Double hashing: two independent 128-bit digests drive all k probes.
        data = term.encode("utf-8", errors="replace")
        h1 = int.from_bytes(hashlib.blake2b(data, digest_size=16).digest(), "big")
        h2 = int.from_bytes(
            hashlib.blake2b(data, digest_size=16, key=b"logforge-bloom").digest(), "big"
        )
        m = self.m
        return ((h1 + i * h2) % m for i in range(self.k))

    def insert(self, term: str) -> None:
        for pos in self._positions(term):
            self.bits[pos >> 3] |= 1 << (pos & 7)
        self.inserted += 1

    def query(self, term: str) -> bool:
        return all(self.bits[pos >> 3] & (1 << (pos & 7)) for pos in self._positions(term))

    def __contains__(self, term: str) -> bool:
        return self.query(term)

    def expected_fp_rate(self, n: int | None = None) -> float:
        """Theoretical false-positive probability after n insertions."""
        n = self.inserted if n is None else n
        return (1.0 - math.exp(-self.k * n / self.m)) ** self.k

    def to_bytes(self) -> bytes:
        return bytes(self.bits)

    @classmethod
    def from_bytes(cls, data: bytes, m: int, k: int, inserted: int = 0) -> "BloomFilter":
        b = cls(m, k)
        if len(data) != len(b.bits):
            raise ValueError("bloom byte length does not match m")
        b.bits = bytearray(data)
        b.inserted = inserted
        return b
