"""Closed-form communication-cost bounds for the join algorithms.

Symbols: n tuples per relation, c largest key value, w largest tuple, h
joining tuples, r replication rate, m total tuples, p most dominating
attributes in one relation, k relations. The log terms come from digests
of ceil(3 log2 m) bits; ``rounding="exact"`` evaluates the unrounded
3 log2 m instead.
"""
from __future__ import annotations

import math
from fractions import Fraction

from .hashing import required_digest_bits

KINDS = {
    "two-way": ("n", "c", "w", "h"),
    "skew": ("n", "c", "w", "h", "r"),
    "hashed": ("n", "m", "c", "w", "h"),
    "multiway": ("k", "n", "p", "m", "c", "w", "h"),
    "classic-two-way": ("n", "w"),
    "classic-skew": ("n", "w", "r"),
    "classic-hashed": ("n", "w"),
    "classic-multiway": ("k", "n", "w"),
}


class BoundError(ValueError):
    pass


def _digest_bits(m, rounding: str):
    if rounding == "ceil":
        return required_digest_bits(m)
    if rounding == "exact":
        return 3 * math.log2(m)
    raise BoundError(f"unknown rounding {rounding!r}")


def theorem_bound(kind: str, rounding: str = "ceil", **params):
    value = _evaluate(kind, rounding, params)
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else float(value)
    return value


def _evaluate(kind, rounding, params):
    try:
        needed = KINDS[kind]
    except KeyError:
        raise BoundError(f"unknown bound kind {kind!r}; expected one of {sorted(KINDS)}") from None
    missing = [p for p in needed if params.get(p) is None]
    if missing:
        raise BoundError(f"{kind} needs {', '.join(missing)}")
    g = params.get
    if kind == "two-way":
        return 2 * g("n") * g("c") + g("h") * (g("c") + g("w"))
    if kind == "skew":
        return 2 * g("n") * g("c") + g("r") * g("h") * (g("c") + g("w"))
    if kind == "hashed":
        return 2 * g("n") * _digest_bits(g("m"), rounding) + g("h") * (g("c") + g("w"))
    if kind == "multiway":
        return (g("k") * g("n") * g("p") * _digest_bits(g("m"), rounding)
                + g("h") * (g("c") + g("w")))
    if kind in ("classic-two-way", "classic-hashed"):
        return 4 * g("n") * g("w")
    if kind == "classic-skew":
        return 2 * g("n") * g("w") * (1 + g("r"))
    return 2 * g("k") * g("n") * g("w")
