"""Seeded, splittable random streams.

Every stochastic routine in the package takes either an integer seed or a
``numpy.random.Generator``. Generators are built on the counter-based Philox
bit generator, and child streams are derived by name so that the same
``(seed, label, index)`` triple always yields the same stream.
"""

import zlib

import numpy as np

__all__ = ["derive_seed_sequence", "make_rng", "as_rng", "BufferedUniforms"]


def _label_key(label):
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def derive_seed_sequence(seed, *labels):
    """Seed sequence for the stream named ``labels`` under root ``seed``."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(x) for x in labels))


def make_rng(seed, *labels):
    """Philox-backed generator for the named child stream of ``seed``."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(seed, *labels)))


def as_rng(seed_or_rng, *labels):
    if isinstance(seed_or_rng, np.random.Generator):
        if labels:
            raise ValueError("labels only apply to integer seeds")
        return seed_or_rng
    return make_rng(seed_or_rng, *labels)


class BufferedUniforms:
    """Uniform(0, 1) draws served one at a time from fixed-size blocks.

    The block size only affects speed; the stream of values is the same as
    ``rng.random()`` called repeatedly with the same block boundaries.
    """

    def __init__(self, rng, block=4096):
        self._rng = rng
        self._block = int(block)
        self._buf = []
        self._pos = 0
        self.drawn = 0

    def __call__(self):
        if self._pos == len(self._buf):
            self._buf = self._rng.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        self.drawn += 1
        return u
