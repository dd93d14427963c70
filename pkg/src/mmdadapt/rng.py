"""Portable pseudo-random numbers.

``XorShift64Star`` is Vigna's xorshift64* generator (shifts 12, 25, 27;
output multiplier 0x2545F4914F6CDD1D), seeded through one SplitMix64 step.
Everything that samples in this package goes through it, so splits and
synthetic data are reproducible from the seed alone, independent of the
numpy version.
"""
import math

import numpy as np

MASK64 = (1 << 64) - 1
ALGORITHM = "xorshift64*/splitmix64-seeded"
VERSION = 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *keys):
    """Mix integer keys into ``seed`` to get an independent stream seed."""
    h = splitmix64(int(seed) & MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


class XorShift64Star:
    def __init__(self, seed=0):
        state = splitmix64(int(seed) & MASK64)
        self._state = state or 0x9E3779B97F4A7C15
        self._spare = None

    def next_u64(self):
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def random(self):
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def randbelow(self, n):
        """Uniform integer in [0, n), unbiased by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def sample(self, n, k):
        """``k`` distinct indices from ``range(n)`` (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n} without replacement")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def permutation(self, n):
        return self.sample(n, n)

    def choice(self, n, k):
        """``k`` indices from ``range(n)`` with replacement."""
        return [self.randbelow(n) for _ in range(k)]

    def indices(self, n, k):
        """Without replacement when ``k <= n``, otherwise with replacement."""
        return self.sample(n, k) if k <= n else self.choice(n, k)

    def gauss(self):
        # Box-Muller, polar-free form; second variate cached
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normal(self, shape, scale=1.0):
        n = int(np.prod(shape)) if shape else 1
        out = np.fromiter((self.gauss() for _ in range(n)), dtype=float, count=n)
        return (scale * out).reshape(shape)
