"""Deterministic per-item random streams derived from one root seed.

Item ``i`` of the stream named ``name`` always gets the same PCG64 state,
no matter how work is split into blocks or threads.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def bit_generator(seed: int, name: str, index: int = 0) -> np.random.PCG64:
    return np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream_key(name), int(index))))


def bit_generators(seed: int, name: str, start: int, count: int) -> list[np.random.PCG64]:
    key = stream_key(name)
    return [np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key, i)))
            for i in range(start, start + count)]


def generator(seed: int, name: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(bit_generator(seed, name, index))


class UniformStream:
    """Sequential uniforms from one bit generator, drawn in small blocks.

    Yields exactly the doubles ``Generator.random()`` would, in order, so a
    pure-Python loop consumes the same stream as the compiled kernels.
    """

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, bitgen: np.random.BitGenerator, block: int = 64):
        self._gen = np.random.Generator(bitgen)
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u
