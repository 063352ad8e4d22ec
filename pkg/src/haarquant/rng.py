"""Seeded, splittable random streams.

Every simulation draws from a substream identified by ``(seed, purpose, block)``.
Paths are simulated in fixed-size blocks, so the numbers a given path sees do
not depend on how many workers run or in which order blocks complete.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

BLOCK_SIZE = 512


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


@dataclass(frozen=True)
class StreamFactory:
    """Factory for named, disjoint substreams derived from one seed."""

    seed: int
    prefix: tuple[int, ...] = ()

    def child(self, purpose: str) -> "StreamFactory":
        return StreamFactory(self.seed, self.prefix + (_purpose_key(purpose),))

    def stream_id(self, purpose: str, block: int = 0) -> tuple[int, ...]:
        return self.prefix + (_purpose_key(purpose), int(block))

    def generator(self, purpose: str, block: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id(purpose, block))
        return np.random.Generator(np.random.PCG64(ss))


def as_factory(rng) -> StreamFactory:
    """Accept a StreamFactory, an int seed or None (seed 0)."""
    if isinstance(rng, StreamFactory):
        return rng
    if rng is None:
        return StreamFactory(0)
    if isinstance(rng, (int, np.integer)):
        return StreamFactory(int(rng))
    raise TypeError(f"expected StreamFactory or int seed, got {type(rng).__name__}")


def blocks(n: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block_size)):
        yield b, start, min(start + block_size, n)
