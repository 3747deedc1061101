"""Per-stage seed derivation.

``derive_seed(seed, tag) = splitmix64(seed XOR fnv1a64(tag))``, so each stage
draws from its own stream and adding a stage never shifts another's.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: str) -> int:
    return splitmix64((seed & MASK64) ^ fnv1a64(tag))
