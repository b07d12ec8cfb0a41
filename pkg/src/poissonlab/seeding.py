"""Counter-based seed derivation.

Realization ``i`` of a campaign with base seed ``b`` uses the 64-bit seed
``mix_seed(b, i)``.  The mixer is the SplitMix64 output function applied
twice:

    mix_seed(b, i) = splitmix64(splitmix64(b) XOR i)

where ``splitmix64(x)`` adds the golden-ratio increment 0x9E3779B97F4A7C15
and applies the finalizer with multipliers 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB (shifts 30, 27, 31).  Because each seed depends only on
``(b, i)``, any assignment of indices to workers yields the same streams.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(base_seed: int, index: int) -> int:
    if index < 0:
        raise ValueError("index must be non-negative")
    return splitmix64(splitmix64(base_seed & MASK64) ^ (index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))
