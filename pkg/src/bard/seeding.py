"""Deterministic stream derivation for replications and assignment draws.

Every stream is addressed by (master seed, labels...), hashed through
blake2b, so results never depend on scheduling order or worker count.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts) -> int:
    key = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def derived_rng(*parts) -> random.Random:
    """A Mersenne Twister stream keyed by the given parts."""
    return random.Random(derive_seed(*parts))


class CounterUniform:
    """Counter-addressed uniform stream.

    Draw i is a pure function of (seed key, i), which makes assignment
    sequences replayable from an event log: restoring the counter restores
    the stream exactly.
    """

    def __init__(self, key: str, counter: int = 0):
        self.key = str(key)
        self.counter = counter

    def random(self) -> float:
        h = hashlib.blake2b(
            f"{self.key}:{self.counter}".encode(), digest_size=8
        ).digest()
        self.counter += 1
        return int.from_bytes(h, "big") / 2.0**64
