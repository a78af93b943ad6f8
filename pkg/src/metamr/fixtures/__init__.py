"""Worked-example relations shipped with the package.

``fig2``: two relations X(A,B), Y(B,C) with three tuples each; B values
are declared 0 units and A, C values 1 unit, so every tuple counts as one
unit. ``fig5``: three clusters of two relations each; see
``fig5/RECONSTRUCTION.txt`` for how the joining tuples were chosen.
``knn``: query and candidate points on one coordinate, see
``knn/POLICY.txt``. ``socialgraph``: six persons and three photos.
"""
from __future__ import annotations

import os

from ..engine import Cluster, JobPlan, Round, Topology
from ..model import CostModel, Relation, Site, load_relation

HERE = os.path.dirname(__file__)
FIG5_CLUSTERS = (("C1", ("U", "V")), ("C2", ("W", "X")), ("C3", ("Y", "Z")))
FIG5_GLOBAL = "C2"
FIG5_Q = 64
FIG2_Q = 4


def path(*parts: str) -> str:
    return os.path.join(HERE, *parts)


def fig2_relations(key_bits: int | None = None, site: str = "user") -> tuple[Relation, Relation]:
    """X and Y of the two-relation example; ``key_bits`` redeclares the B size."""
    x = load_relation(path("fig2", "X.tsv"), home_site=site)
    y = load_relation(path("fig2", "Y.tsv"), home_site=site)
    if key_bits is not None:
        x = _resize(x, "B", key_bits)
        y = _resize(y, "B", key_bits)
    return x, y


def _resize(rel: Relation, attr: str, bits: int) -> Relation:
    sizes = {a: (bits if a == attr else rel.tuples[0].values[i].size_bits)
             for i, a in enumerate(rel.attributes)} if rel.tuples else {attr: bits}
    rows = [[v.payload for v in t.values] for t in rel.tuples]
    return Relation.from_rows(rel.name, rel.attributes, rows, rel.home_site, sizes)


def fig5_clusters() -> list[Cluster]:
    out = []
    for site, names in FIG5_CLUSTERS:
        rels = tuple(load_relation(path("fig5", site, f"{n}.tsv"), home_site=site) for n in names)
        out.append(Cluster(site, rels, (Round("B"),)))
    return out


def fig5_topology() -> Topology:
    sites = tuple(Site(s, "global-cluster" if s == FIG5_GLOBAL else "compute-cluster")
                  for s, _ in FIG5_CLUSTERS)
    return Topology(sites=sites, compute_site=FIG5_GLOBAL, global_site=FIG5_GLOBAL)


def fig5_global_plan(mode: str) -> JobPlan:
    return JobPlan(mode, (Round("B"), Round("B")), co_located=True,
                   cost=CostModel(unit_cost=True))


def knn_relations() -> tuple[Relation, Relation]:
    return load_relation(path("knn", "R.tsv")), load_relation(path("knn", "S.tsv"))


def social_graph():
    from ..socialgraph import SocialGraph

    nodes = load_relation(path("socialgraph", "nodes.tsv"), name="nodes")
    edges = load_relation(path("socialgraph", "edges.tsv"))
    pairs = [(t.values[0].text(), t.values[1].text()) for t in edges.tuples]
    return SocialGraph(nodes, tuple(pairs))
