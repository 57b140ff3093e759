"""Deterministic random streams.

All randomness in the toolkit flows through :class:`Rng`, a thin wrapper
around the PCG64 bit generator (O'Neill 2014, as shipped by numpy).  Uniform
doubles are produced by the fixed ``next_uint64 >> 11`` construction that
numpy's ``Generator.random`` uses; standard normals are produced by the
Box-Muller transform on those uniforms, so a given seed and call sequence
yields bit-identical streams on any 64-bit platform.

Pipeline stages never share a stream: ``split(label)`` derives an independent
child via ``numpy.random.SeedSequence`` with a spawn key obtained from the
CRC-32 of the label.  Adding a new stage therefore never perturbs the draws
of an existing one.
"""

import zlib

import numpy as np

_TWO_PI = 2.0 * np.pi


class Rng:
    """PCG64-backed random stream with Box-Muller normal sampling."""

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._spawn_key = tuple(_spawn_key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self._spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self.counter = 0  # number of draw calls issued, for diagnostics

    def split(self, label: str) -> "Rng":
        """Derive an independent child stream named by ``label``.

        The child's spawn key extends this stream's key with the CRC-32 of
        the label, so the mapping (root seed, label path) -> stream is stable.
        """
        key = zlib.crc32(label.encode("utf-8"))
        return Rng(self.seed, self._spawn_key + (key,))

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform doubles in [low, high)."""
        self.counter += 1
        return low + (high - low) * self._gen.random(shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integers uniform on [low, high)."""
        self.counter += 1
        return self._gen.integers(low, high, size=shape)

    def normal(self, shape=()) -> np.ndarray:
        """Standard normals via Box-Muller on PCG64 uniforms.

        An even number of uniforms is drawn per call; for odd output sizes
        the trailing sine-branch sample is discarded.
        """
        self.counter += 1
        n = int(np.prod(shape)) if shape != () else 1
        half = (n + 1) // 2
        # 1 - random() lies in (0, 1], keeping log() finite.
        u1 = 1.0 - self._gen.random(half)
        u2 = self._gen.random(half)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * half)
        out[0::2] = r * np.cos(_TWO_PI * u2)
        out[1::2] = r * np.sin(_TWO_PI * u2)
        out = out[:n]
        if shape == ():
            return out[0]
        return out.reshape(shape)

    def __repr__(self):
        return f"Rng(seed={self.seed}, spawn_key={self._spawn_key}, counter={self.counter})"
