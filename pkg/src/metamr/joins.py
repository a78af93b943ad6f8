"""Join algorithms built on the engine: two-way, skew, hashed-key, cascade, hierarchical."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .engine import (DEFAULT_TOPOLOGY, Cluster, JobPlan, JobResult, PlanError, Round, Topology,
                     dominating_attributes, run_hierarchical, run_job)
from .hashing import HashConfig
from .model import DEFAULT_COST, CostModel, Relation, Site, tuple_size_bits
from .schema import OversizedGroup

log = logging.getLogger(__name__)

BIG_Q = 1 << 62


@dataclass(frozen=True)
class JoinSpec:
    """Relations plus the attribute equalities joining them.

    ``join_graph`` lists ``(relation, relation, attribute)`` edges; by
    default every shared attribute joins every pair of relations holding it.
    A key group is heavy when its original size exceeds
    ``heavy_hitter_threshold * q``.
    """
    relations: tuple[Relation, ...]
    join_graph: tuple[tuple[str, str, str], ...] = ()
    heavy_hitter_threshold: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        by_name = {r.name: r for r in self.relations}
        graph = tuple(self.join_graph) or tuple(
            (a.name, b.name, attr)
            for i, a in enumerate(self.relations) for b in self.relations[i + 1:]
            for attr in a.attributes if attr in b.attributes)
        for left, right, attr in graph:
            for name in (left, right):
                if name not in by_name:
                    raise PlanError(f"join graph names unknown relation {name!r}")
                by_name[name].position(attr)
        object.__setattr__(self, "join_graph", graph)

    def heavy_keys(self, attr: str, q: int) -> list[bytes]:
        sizes: dict[bytes, int] = {}
        for rel in self.relations:
            if attr not in rel.attributes:
                continue
            pos = rel.position(attr)
            for t in rel.tuples:
                k = t.values[pos].payload
                sizes[k] = sizes.get(k, 0) + tuple_size_bits(t)
        return sorted(k for k, s in sizes.items() if s > self.heavy_hitter_threshold * q)


def _two_way(mode: str, X: Relation, Y: Relation, attr: str, q: int, topology: Topology,
             strategy: str, cost: CostModel, seed: int, co_located: bool, hashed: bool = False,
             digester: HashConfig | None = None, workers: int = 1) -> JobResult:
    for rel in (X, Y):
        rel.position(attr)
    plan = JobPlan(mode, (Round(attr, strategy),), co_located=co_located, hashed=hashed,
                   digester=digester, cost=cost)
    return run_job(plan, [X, Y], topology, q, seed, workers)


def equijoin_meta(X: Relation, Y: Relation, attr: str, q: int = BIG_Q,
                  topology: Topology = DEFAULT_TOPOLOGY, *, cost: CostModel = DEFAULT_COST,
                  seed: int = 0, co_located: bool = False, workers: int = 1) -> JobResult:
    try:
        return _two_way("meta", X, Y, attr, q, topology, "key-group", cost, seed, co_located,
                        workers=workers)
    except OversizedGroup as exc:
        log.info("%s; switching to the skew join", exc)
        return skew_join_meta(X, Y, attr, q, topology, cost=cost, seed=seed,
                              co_located=co_located, workers=workers)


def equijoin_classic(X: Relation, Y: Relation, attr: str, q: int = BIG_Q,
                     topology: Topology = DEFAULT_TOPOLOGY, *, cost: CostModel = DEFAULT_COST,
                     seed: int = 0, co_located: bool = False, workers: int = 1) -> JobResult:
    try:
        return _two_way("classic", X, Y, attr, q, topology, "key-group", cost, seed, co_located,
                        workers=workers)
    except OversizedGroup:
        return _two_way("classic", X, Y, attr, q, topology, "skew", cost, seed, co_located,
                        workers=workers)


def skew_join_meta(X: Relation, Y: Relation, attr: str, q: int = BIG_Q,
                   topology: Topology = DEFAULT_TOPOLOGY, *, cost: CostModel = DEFAULT_COST,
                   seed: int = 0, co_located: bool = False, workers: int = 1) -> JobResult:
    """Heavy key groups are split into q/2 bins per side and every bin pair meets."""
    return _two_way("meta", X, Y, attr, q, topology, "skew", cost, seed, co_located,
                    workers=workers)


def hashed_join_meta(X: Relation, Y: Relation, attr: str, q: int = BIG_Q,
                     topology: Topology = DEFAULT_TOPOLOGY, *, cost: CostModel = DEFAULT_COST,
                     seed: int = 0, co_located: bool = False, digester: HashConfig | None = None,
                     strategy: str = "key-group", workers: int = 1) -> JobResult:
    """Join on digests of the key instead of the key itself.

    The digest width follows the total tuple count unless ``digester`` pins
    it; a collision surfaces when fetched originals disagree and the job is
    rerun under a fresh hash function.
    """
    return _two_way("meta", X, Y, attr, q, topology, strategy, cost, seed, co_located,
                    hashed=True, digester=digester, workers=workers)


def find_dominating_attrs(relations: Sequence[Relation]) -> set[str]:
    if len(relations) < 2:
        raise ValueError("need at least two relations")
    return dominating_attributes(relations)


def cascade_rounds(relations: Sequence[Relation], strategy: str = "key-group") -> tuple[Round, ...]:
    """One round per two-way join, keyed on the first attribute the next relation shares."""
    seen = list(relations[0].attributes)
    rounds = []
    for rel in relations[1:]:
        shared = [a for a in rel.attributes if a in seen]
        if not shared:
            raise PlanError(f"{rel.name} shares no attribute with the relations before it")
        rounds.append(Round(shared[0], strategy))
        seen.extend(a for a in rel.attributes if a not in seen)
    return tuple(rounds)


def multiway_join_meta(relations: Sequence[Relation], join_order: Sequence[Union[str, int]] | None = None,
                       q: int = BIG_Q, topology: Topology = DEFAULT_TOPOLOGY, *,
                       rounds: Sequence[Round] | None = None, cost: CostModel = DEFAULT_COST,
                       seed: int = 0, co_located: bool = False,
                       digester: HashConfig | None = None, mode: str = "meta",
                       workers: int = 1) -> JobResult:
    """Cascade of two-way joins over digests of the dominating attributes.

    Attributes held by a single relation travel as size descriptors only;
    only the last round calls originals.
    """
    relations = list(relations)
    if join_order is not None:
        by_name = {r.name: r for r in relations}
        relations = [relations[o] if isinstance(o, int) else by_name[o] for o in join_order]
    if len(relations) < 2:
        raise PlanError("need at least two relations")
    rounds = tuple(rounds) if rounds is not None else cascade_rounds(relations)
    plan = JobPlan(mode, rounds, co_located=co_located, hashed=(mode == "meta"),
                   digester=digester, cost=cost)
    return run_job(plan, relations, topology, q, seed, workers)


ClusterInput = Union[Cluster, tuple]


def hierarchical_equijoin(clusters: Sequence[ClusterInput], attr: str, q: int = BIG_Q, *,
                          mode: str = "meta", global_site: str | None = None,
                          topology: Topology | None = None, cost: CostModel = DEFAULT_COST,
                          seed: int = 0, workers: int = 1) -> JobResult:
    """Join relations spread over several clusters on one shared attribute.

    ``clusters`` holds :class:`Cluster` objects or ``(site_id, relations)``
    pairs; the global join runs in the given cluster order.
    """
    built = []
    for cl in clusters:
        if not isinstance(cl, Cluster):
            site, rels = cl
            rels = tuple(rels)
            cl = Cluster(site, rels, tuple(Round(attr) for _ in rels[1:]))
        for rel in cl.relations:
            rel.position(attr)
        built.append(cl)
    if not built:
        raise PlanError("no clusters")
    gsite = global_site or (topology.global_site if topology else None) or built[0].site_id
    if topology is None:
        topology = Topology(
            sites=tuple(Site(c.site_id, "global-cluster" if c.site_id == gsite else "compute-cluster")
                        for c in built),
            compute_site=gsite, global_site=gsite)
    plan = JobPlan(mode, tuple(Round(attr) for _ in built[1:]) or (Round(attr),),
                   co_located=True, cost=cost)
    return run_hierarchical(built, plan, topology, q, seed, workers)


# ---------------------------------------------------------------------------
# measured parameters

def measure(result: JobResult, relations: Sequence[Relation], key_attrs: Sequence[str] | None = None) -> dict:
    """Cost-formula parameters observed on one run.

    n: largest relation, c: largest key value (bits), w: largest tuple,
    h: distinct tuples in some output, r: average reducers per such tuple in
    the final round, m: total tuples, p: most dominating attributes in one
    relation, k: relation count.
    """
    keys = set(key_attrs) if key_attrs else dominating_attributes(relations)
    c = 0
    w = 0
    for rel in relations:
        pos = [rel.position(a) for a in rel.attributes if a in keys]
        for t in rel.tuples:
            w = max(w, tuple_size_bits(t))
            for i in pos:
                c = max(c, t.values[i].size_bits)
    joined = {o for prov in result.provenance for o in prov}
    h = len(joined)
    copies = result.extras.get("participating_copies", h)
    return {
        "n": max((len(r) for r in relations), default=0),
        "c": c,
        "w": w,
        "h": h,
        "r": Fraction(copies, h) if h else Fraction(1),
        "m": sum(len(r) for r in relations),
        "p": max((sum(1 for a in r.attributes if a in keys) for r in relations), default=0),
        "k": len(relations),
        "q": None,
    }
