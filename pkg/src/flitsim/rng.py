"""Seeded counter-based random streams.

All randomness in an experiment flows from one 64-bit seed through named
substreams. A draw is addressed by (seed, label, counters...), never by
how many draws happened before it, so results are identical no matter
which order consumers evaluate in.
"""

from __future__ import annotations

import hashlib

import numpy as np


class SubStream:
    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        digest = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=16).digest()
        self._key = np.frombuffer(digest, dtype=np.uint64)

    def generator(self, *counters: int) -> np.random.Generator:
        """Fresh generator for a specific counter tuple (up to 4 ints)."""
        if len(counters) > 4:
            raise ValueError("at most 4 counter components")
        counter = np.zeros(4, dtype=np.uint64)
        for i, c in enumerate(counters):
            counter[i] = np.uint64(c & 0xFFFFFFFFFFFFFFFF)
        return np.random.Generator(np.random.Philox(counter=counter, key=self._key))

    def normal_pair(self, *counters: int) -> tuple[float, float]:
        g = self.generator(*counters)
        x, y = g.standard_normal(2)
        return float(x), float(y)
