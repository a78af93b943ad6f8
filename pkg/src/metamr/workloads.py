"""Synthetic relations for benchmarks and property checks."""
from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .model import Relation

_ALPHABET = np.array(list(string.ascii_lowercase + string.digits))
_KEY_DIGITS = string.digits + string.ascii_lowercase


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    """Two-relation workload X(A,B), Y(B,C) joined on B.

    Keys are exactly ``c`` bits and every non-key value ``w - c`` bits, so
    each tuple is exactly ``w`` bits. Key frequencies follow a Zipf law with
    exponent ``zipf`` (0 is uniform); ``heavy_hitters`` keys additionally
    receive ``heavy_share`` of each relation's tuples.
    """
    n: int
    c: int = 16
    w: int = 256
    distinct_keys: int = 10
    zipf: float = 0.0
    heavy_hitters: int = 0
    heavy_share: float = 0.5
    seed: int = 0
    shape: str | None = None

    def validate(self) -> None:
        if self.shape not in (None, "fig2"):
            raise GenerationError(f"unknown shape {self.shape!r}")
        if self.shape:
            return
        if self.n < 0:
            raise GenerationError("n must be non-negative")
        if self.c <= 0 or self.w <= 0 or self.c % 8 or self.w % 8:
            raise GenerationError("c and w must be positive multiples of 8 bits")
        if self.c > self.w:
            raise GenerationError("key size c cannot exceed tuple size w")
        if self.n and self.distinct_keys < 1:
            raise GenerationError("need at least one distinct key")
        if len(_KEY_DIGITS) ** (self.c // 8) < self.distinct_keys:
            raise GenerationError(f"{self.distinct_keys} keys do not fit in {self.c} bits")
        if not 0 <= self.heavy_hitters <= self.distinct_keys:
            raise GenerationError("heavy_hitters must be between 0 and distinct_keys")
        if not 0.0 <= self.heavy_share <= 1.0 or self.zipf < 0:
            raise GenerationError("heavy_share must lie in [0, 1] and zipf be non-negative")


def key_text(index: int, width_bytes: int) -> str:
    digits = []
    while True:
        index, d = divmod(index, len(_KEY_DIGITS))
        digits.append(_KEY_DIGITS[d])
        if not index:
            break
    return "".join(reversed(digits)).rjust(width_bytes, "0")


def key_probabilities(distinct: int, zipf: float) -> np.ndarray:
    ranks = np.arange(1, distinct + 1, dtype=float)
    weights = ranks ** -zipf
    return weights / weights.sum()


def sample_keys(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    keys = rng.choice(spec.distinct_keys, size=spec.n, p=key_probabilities(spec.distinct_keys, spec.zipf))
    if spec.heavy_hitters:
        heavy = rng.random(spec.n) < spec.heavy_share
        keys[heavy] = rng.integers(0, spec.heavy_hitters, size=int(heavy.sum()))
    return keys


def gen_relations(spec: GenSpec) -> tuple[Relation, Relation]:
    spec.validate()
    if spec.shape == "fig2":
        from .fixtures import fig2_relations
        return fig2_relations()
    rng = np.random.default_rng(spec.seed)
    key_bytes, pay_bytes = spec.c // 8, (spec.w - spec.c) // 8
    out = []
    for name, attrs, key_first in (("X", ("A", "B"), False), ("Y", ("B", "C"), True)):
        keys = sample_keys(spec, rng)
        pays = rng.choice(_ALPHABET, size=(spec.n, pay_bytes)) if pay_bytes else np.empty((spec.n, 0), str)
        rows = []
        for k, p in zip(keys, pays):
            kt, pt = key_text(int(k), key_bytes), "".join(p)
            rows.append((kt, pt) if key_first else (pt, kt))
        # payload sizes are declared so an empty payload still reports its bits
        out.append(Relation.from_rows(name, attrs, rows,
                                      sizes={a: (spec.c if a == "B" else spec.w - spec.c)
                                             for a in attrs}))
    return out[0], out[1]
