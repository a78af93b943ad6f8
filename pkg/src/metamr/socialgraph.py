"""Shortest paths between persons in a person/photo graph, searched on metadata.

Breadth-first search runs as iterated rounds over node records that carry
only the node id, its adjacency list and the size of its payload. When the
target is reached, only the payloads of the nodes on one shortest path are
fetched.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .engine import DEFAULT_TOPOLOGY, CostLedger, Decision, JobResult, Topology, call_fetch
from .model import DEFAULT_COST, CostModel, Origin, Relation, build_index

KINDS = ("person", "photo")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class SocialGraph:
    """Nodes live in a relation ``(id, kind, payload)``; edges are undirected."""
    nodes: Relation
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def build(cls, nodes: Mapping[str, tuple[str, str]], edges: Iterable[tuple[str, str]],
              name: str = "nodes", home_site: str = "user") -> "SocialGraph":
        rows = [(nid, kind, payload) for nid, (kind, payload) in sorted(nodes.items())]
        rel = Relation.from_rows(name, ("id", "kind", "payload"), rows, home_site)
        return cls(rel, tuple(edges))

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        kinds = self.kinds()
        for nid, kind in kinds.items():
            if kind not in KINDS:
                raise GraphError(f"node {nid} has unknown kind {kind!r}")
        for a, b in self.edges:
            for n in (a, b):
                if n not in kinds:
                    raise GraphError(f"edge ({a}, {b}) names unknown node {n}")
            if kinds[a] == kinds[b] == "photo":
                raise GraphError(f"edge ({a}, {b}) joins two photos")

    def kinds(self) -> dict[str, str]:
        pos_id, pos_kind = self.nodes.position("id"), self.nodes.position("kind")
        return {t.values[pos_id].text(): t.values[pos_kind].text() for t in self.nodes.tuples}

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, set[str]] = {nid: set() for nid in self.kinds()}
        for a, b in self.edges:
            if a != b:
                adj[a].add(b)
                adj[b].add(a)
        return {n: sorted(v) for n, v in adj.items()}


def _id_bits(nid: str) -> int:
    return 8 * len(nid.encode("utf-8"))


def shortest_path_meta(graph: SocialGraph, src: str, dst: str,
                       topology: Topology = DEFAULT_TOPOLOGY, *,
                       cost: CostModel = DEFAULT_COST, co_located: bool = False) -> JobResult:
    """One shortest path from ``src`` to ``dst``; ties go to the smallest parent id.

    ``extras["path"]`` lists node ids (None when unreachable) and
    ``extras["distance"]`` the number of edges.
    """
    kinds = graph.kinds()
    for n in (src, dst):
        if kinds.get(n) != "person":
            raise GraphError(f"{n!r} is not a person node")
    rel = graph.nodes.at(topology.site_of(graph.nodes))
    adj = graph.adjacency()
    pos_id = rel.position("id")
    origin = {t.values[pos_id].text(): Origin(rel.name, t.tuple_id, rel.home_site)
              for t in rel.tuples}
    ledger = CostLedger()
    record_bits = {n: cost.meta_bits(_id_bits(n) + sum(_id_bits(m) for m in adj[n]), 2)
                   for n in adj}
    if not co_located:
        ledger.charge("user_to_map", sum(record_bits.values()), "upload", "meta", len(adj))

    def message_bits(target: str, parent: str) -> int:
        return cost.meta_bits(_id_bits(target) + _id_bits(parent), 0)

    dist = {src: 0}
    parent: dict[str, str] = {}
    frontier = [src] if src != dst else []
    rounds = 0
    while frontier and dst not in dist:
        rounds += 1
        label = f"round{rounds}"
        offers: dict[str, list[str]] = {}
        bits = sum(record_bits.values())
        for n in frontier:
            for m in adj[n]:
                offers.setdefault(m, []).append(n)
                bits += message_bits(m, n)
        ledger.charge("map_to_reduce", bits, label, "meta",
                      len(adj) + sum(len(v) for v in offers.values()))
        frontier = []
        for m in sorted(offers):
            if m in dist:
                continue
            dist[m] = rounds
            parent[m] = min(offers[m])
            frontier.append(m)

    path: list[str] | None = None
    if dst in dist:
        path = [dst]
        while path[-1] != src:
            path.append(parent[path[-1]])
        path.reverse()
    ledger.participating_map_to_reduce += sum(
        message_bits(b, a) for a, b in zip(path or [], (path or [])[1:]))

    decisions = []
    if rounds:
        on_path = set(path or ())
        decisions = [Decision(("path",), (origin[n],), n in on_path and len(on_path) > 1)
                     for n in sorted(dist)]
    index = {rel.name: build_index(rel, "id")}
    fetched = call_fetch(decisions, index, ledger, cost, round_label=f"round{rounds}")
    outputs = []
    if path and len(path) > 1:
        have = fetched[("path",)]
        outputs = [have[origin[n]].values for n in path]
    return JobResult(rel.attributes, outputs, [(origin[n],) for n in path or []][:len(outputs)],
                     ledger, rounds, mode="meta", fetched=fetched,
                     extras={"path": path, "distance": dist.get(dst)})
