"""Short digests for large join keys, and the rehash used after a collision."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from .model import AttributeValue, Digest

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HashConfig:
    seed: int
    output_bits: int
    family_round: int = 0

    def __post_init__(self):
        if self.output_bits < 1:
            raise ValueError("output_bits must be at least 1")
        object.__setattr__(self, "seed", self.seed & _MASK64)


def required_digest_bits(m: int) -> int:
    """Width that maps ``m`` keys into ``m**3`` slots, i.e. ceil(3 log2 m)."""
    if m < 1:
        raise ValueError("m must be positive")
    m = max(m, 2)
    # smallest b with 2**b >= m**3, computed exactly
    return (m ** 3 - 1).bit_length()


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def digest(v: AttributeValue, cfg: HashConfig) -> Digest:
    nbytes = min(64, max(8, (cfg.output_bits + 7) // 8))
    if 8 * nbytes < cfg.output_bits:
        raise ValueError("output_bits above 512 is not supported")
    h = hashlib.blake2b(v.payload, digest_size=nbytes, key=cfg.seed.to_bytes(8, "little"))
    full = int.from_bytes(h.digest(), "big")
    return Digest(full >> (8 * nbytes - cfg.output_bits), cfg.output_bits)


def rehash(cfg: HashConfig) -> HashConfig:
    nxt = cfg.family_round + 1
    return replace(cfg, seed=_splitmix64(cfg.seed ^ _splitmix64(nxt)), family_round=nxt)
