"""Nested-loop reference join used by ``verify``."""
from __future__ import annotations

from typing import Sequence

from .model import Relation


def nested_loop_join(relations: Sequence[Relation]) -> list[tuple[bytes, ...]]:
    """Natural join of ``relations`` as sorted payload tuples in first-seen attribute order."""
    attrs: list[str] = []
    rows: list[dict[str, bytes]] = [{}]
    for rel in relations:
        attrs.extend(a for a in rel.attributes if a not in attrs)
        nxt = []
        for row in rows:
            for t in rel.tuples:
                vals = {a: v.payload for a, v in zip(rel.attributes, t.values)}
                if all(row.get(a, v) == v for a, v in vals.items()):
                    nxt.append({**row, **vals})
        rows = nxt
    return sorted(tuple(r[a] for a in attrs) for r in rows)
