"""Seeded, reproducible random streams.

The base generator is Philox4x64-10, a counter-based generator: its state
is a 256-bit counter and a 128-bit key, and each output block is a fixed
10-round bijection of the counter under the key, using the published
multipliers 0xD2E7470EE14C6C93, 0xCA5A826395121157 and Weyl increments
0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B. The key is ``(seed, stream)``, so
streams with different ids are independent and a given ``(seed, stream)``
reproduces bit-for-bit on every platform.

Only raw uniform doubles are taken from numpy's generator. Normals come
from Box-Muller on those uniforms (see :meth:`RngStream.standard_normal`),
so every derived distribution here is a fixed algorithm of the Philox bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass
class RngStream:
    """A live random stream keyed by ``(seed, stream)``.

    A stream is mutable: drawing advances it. Parallel workers must each
    own a stream with a distinct ``stream`` id.
    """

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream = int(self.stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream):
        """A fresh stream with the same seed and another stream id."""
        return RngStream(self.seed, stream)

    def uniform(self, size=None):
        """Uniform draws on the open interval (0, 1)."""
        u = self._gen.random(size)
        # random() is on [0, 1); reflect to (0, 1]
        u = 1.0 - u
        if np.ndim(u) == 0:
            return float(u) if u < 1.0 else float(np.nextafter(1.0, 0.0))
        return np.minimum(u, np.nextafter(1.0, 0.0))

    def standard_normal(self, size=None):
        """Standard normals by the Box-Muller transform."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        t = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(t), r * np.sin(t)])[:n]
        if scalar:
            return float(z[0])
        return z.reshape(size)

    def complex_normal(self, size=None):
        """Circular complex Gaussians with E|z|^2 = 1."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        z = self.standard_normal(2 * n)
        out = (z[:n] + 1j * z[n:]) / np.sqrt(2.0)
        if scalar:
            return complex(out[0])
        return out.reshape(size)

    def phase(self, size=None):
        """Uniform points on the unit circle."""
        t = 2.0 * np.pi * self.uniform(size)
        return np.exp(1j * t)
