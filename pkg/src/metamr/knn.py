"""Two-round k-nearest-neighbour join over metadata.

Coordinates travel as key material while every other attribute stays at
the user site. Round one pairs FFD-packed partitions of R and S (each at
most q/2) and keeps a local top-k per R tuple; round two merges the local
lists per R tuple. Only the winners and their R tuples are fetched.
"""
from __future__ import annotations

import itertools
from typing import Sequence

from .engine import (DEFAULT_TOPOLOGY, CostLedger, Decision, JobResult, Row, Topology,
                     _Execution, call_fetch, orig_bits, wire_bits)
from .model import DEFAULT_COST, CostModel, Origin, Relation, build_index
from .schema import skew_assign

BIG_Q = 1 << 62


class ParameterError(ValueError):
    pass


def distance2(a: Sequence[float], b: Sequence[float]) -> float:
    return sum((x - y) * (x - y) for x, y in zip(a, b))


def _numeric(rel: Relation, attr: str) -> bool:
    pos = rel.position(attr)
    try:
        for t in rel.tuples:
            float(t.values[pos].text())
    except ValueError:
        return False
    return True


def _coords(row: Row, coords: Sequence[str]) -> tuple[float, ...]:
    out = []
    for a in coords:
        material = row.cell(a).material
        out.append(float(material.value.text()))
    return tuple(out)


def knn_meta(R: Relation, S: Relation, k: int, q: int = BIG_Q,
             topology: Topology = DEFAULT_TOPOLOGY, *, coords: Sequence[str] | None = None,
             cost: CostModel = DEFAULT_COST, co_located: bool = False) -> JobResult:
    """For every tuple of R, its k nearest tuples of S by squared Euclidean distance.

    Ties are broken by S tuple id. ``coords`` defaults to the attributes R and
    S share whose values all parse as numbers.
    """
    if not 1 <= k <= len(S):
        raise ParameterError(f"k must lie in [1, |S|={len(S)}], got {k}")
    if len(R) > len(S):
        raise ParameterError(f"|R|={len(R)} exceeds |S|={len(S)}")
    if R.name == S.name:
        raise ParameterError("R and S need distinct names")
    coords = tuple(coords or (a for a in R.attributes
                              if a in S.attributes and _numeric(R, a) and _numeric(S, a)))
    if not coords:
        raise ParameterError("no coordinate attributes")
    for a in coords:
        R.position(a)
        S.position(a)
    R, S = R.at(topology.site_of(R)), S.at(topology.site_of(S))

    ledger = CostLedger()
    ex = _Execution("meta", cost, q, ledger, {R.name: R, S.name: S})
    rrows = ex.base_rows(R, coords, None)
    srows = ex.base_rows(S, coords, None)
    if not co_located:
        ex.charge_rows("user_to_map", rrows + srows, "upload")
    at = {row.rid: _coords(row, coords) for row in itertools.chain(rrows, srows)}
    sid = {row.rid: row.origins[0].tuple_id for row in srows}

    # round 1: every R partition meets every S partition
    schema = skew_assign({r.rid: orig_bits(r) for r in rrows},
                         {s.rid: orig_bits(s) for s in srows}, q)
    by_rid = {row.rid: row for row in itertools.chain(rrows, srows)}
    r_ids = {r.rid for r in rrows}
    shuffled = [by_rid[i] for red in schema.reducers for i in sorted(red)]
    ledger.charge("map_to_reduce", sum(wire_bits(r, cost) for r in shuffled), "round1", "meta",
                  len(shuffled))
    local: dict[int, list[tuple]] = {}   # r rid -> [(dist, s tuple id, s rid, reducer)]
    for ri, red in enumerate(schema.reducers):
        rs = sorted(i for i in red if i in r_ids)
        ss = sorted(i for i in red if i not in r_ids)
        for r in rs:
            ranked = sorted((distance2(at[r], at[s]), sid[s], s) for s in ss)[:k]
            local.setdefault(r, []).extend((d, t, s, ri) for d, t, s in ranked)

    # round 2: merge candidate lists per R tuple
    cand_bits = {r: wire_bits(by_rid[r], cost) for r in r_ids}
    n_cand = sum(len(v) for v in local.values())
    ledger.charge("map_to_reduce",
                  sum(cand_bits[r] + wire_bits(by_rid[c[2]], cost)
                      for r, cands in local.items() for c in cands),
                  "round2", "meta", n_cand)

    winners: dict[int, list[tuple]] = {}
    decisions = []
    participating = 0
    used_round1: set[tuple[int, int]] = set()
    for r in sorted(local, key=lambda i: by_rid[i].origins):
        cands = sorted(local[r])
        top = cands[:k]
        winners[r] = top
        label = ("knn", by_rid[r].origins[0])
        chosen = {(c[2], c[3]) for c in top}
        for c in cands:
            win = (c[2], c[3]) in chosen
            decisions.append(Decision(label, by_rid[r].origins + by_rid[c[2]].origins, win))
            if win:
                participating += cand_bits[r] + wire_bits(by_rid[c[2]], cost)
                used_round1.add((c[3], c[2]))
                used_round1.add((c[3], r))
    participating += sum(wire_bits(by_rid[i], cost) for _, i in used_round1)
    ledger.participating_map_to_reduce += participating

    indexes = {R.name: build_index(R, coords[0]), S.name: build_index(S, coords[0])}
    fetched = call_fetch(decisions, indexes, ledger, cost, round_label="round2")

    attrs = tuple(f"{R.name}.{a}" for a in R.attributes) + tuple(f"{S.name}.{a}" for a in S.attributes)
    outputs, provenance = [], []
    neighbours: dict[int, list[int]] = {}
    for r, top in winners.items():
        r_origin = by_rid[r].origins[0]
        have = fetched[("knn", r_origin)]
        for _, t, s, _ in top:
            s_origin = by_rid[s].origins[0]
            outputs.append(have[r_origin].values + have[s_origin].values)
            provenance.append((r_origin, s_origin))
            neighbours.setdefault(r_origin.tuple_id, []).append(t)
    return JobResult(attrs, outputs, provenance, ledger, 2, mode="meta", fetched=fetched,
                     replication={"round1": len(shuffled) / max(1, len(rrows) + len(srows))},
                     extras={"neighbours": neighbours, "partitions": len(schema.reducers)})


def knn_origins(result: JobResult) -> set[Origin]:
    """Origins the answer refers to; a minimal fetch touches exactly these."""
    return {o for prov in result.provenance for o in prov}
