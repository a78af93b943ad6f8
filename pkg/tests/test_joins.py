import random

import pytest
from hypothesis import given, strategies as st

from metamr import (CostModel, HashConfig, JoinSpec, Relation, Round, equijoin_classic,
                    equijoin_meta, find_dominating_attrs, hashed_join_meta, hierarchical_equijoin,
                    measure, multiway_join_meta, skew_join_meta, theorem_bound)
from metamr.fixtures import FIG2_Q, fig2_relations, fig5_clusters
from metamr.joins import cascade_rounds

from instances import chain, keyed, two_way, unique_chain
from oracles import sql_join

UNIT = CostModel(unit_cost=True)


def heavy_pair():
    X = Relation.from_rows("X", ("a", "B"), [(f"a{i}", "b1") for i in range(4)], sizes={"a": 2, "B": 0})
    Y = Relation.from_rows("Y", ("B", "c"), [("b1", f"c{i}") for i in range(4)], sizes={"c": 2, "B": 0})
    return X, Y


def test_fig2_meta_and_classic():
    X, Y = fig2_relations()
    meta = equijoin_meta(X, Y, "B", FIG2_Q, cost=UNIT)
    classic = equijoin_classic(X, Y, "B", FIG2_Q, cost=UNIT)
    assert len(meta.outputs) == 4 and meta.ledger["user_to_reduce_fetch"] == 4
    assert classic.ledger.total == 12
    assert meta.output_set() == classic.output_set()


def test_disjoint_keys():
    X = Relation.from_rows("X", ("a", "B"), [("a", "k1")])
    Y = Relation.from_rows("Y", ("B", "c"), [("k2", "c")])
    res = equijoin_meta(X, Y, "B")
    assert res.outputs == [] and res.ledger["user_to_reduce_fetch"] == 0


def test_empty_classic_is_free():
    X, Y = Relation("X", ("a", "B"), ()), Relation("Y", ("B", "c"), ())
    assert equijoin_classic(X, Y, "B").ledger.total == 0


def test_two_way_bound_on_hundred_tuples():
    rng = random.Random(8)
    X = keyed("X", ("a", "B"), 100, rng, key_bits=16, payload_bits=240, distinct=60)
    Y = keyed("Y", ("B", "c"), 100, rng, key_bits=16, payload_bits=240, distinct=60)
    res = equijoin_meta(X, Y, "B")
    h = len(sql_join([X, Y])[1])
    assert res.ledger.theorem_relevant <= theorem_bound("two-way", n=100, c=16, w=256, h=h)


@given(st.integers(0, 10**6))
def test_savings_when_formula_predicts_them(seed):
    X, Y = two_way(seed, key_bits=16, payload_bits=240)
    meta, classic = equijoin_meta(X, Y, "B"), equijoin_classic(X, Y, "B")
    n, h = max(len(X), len(Y)), len(sql_join([X, Y])[1])
    if theorem_bound("two-way", n=n, c=16, w=256, h=h) <= 4 * n * 256:
        assert classic.ledger.total - meta.ledger.theorem_relevant >= 0


def test_heavy_hitter_split():
    X, Y = heavy_pair()
    res = skew_join_meta(X, Y, "B", q=8, cost=UNIT)
    assert len(res.outputs) == 16
    assert res.replication["round1"] == 2
    assert measure(res, [X, Y])["r"] == 2
    assert res.output_set() == sql_join([X, Y])[0]


def test_key_group_falls_back_to_skew():
    X, Y = heavy_pair()
    assert equijoin_meta(X, Y, "B", q=8).output_set() == sql_join([X, Y])[0]
    assert equijoin_classic(X, Y, "B", q=8).output_set() == sql_join([X, Y])[0]


def test_skew_without_heavy_hitters_matches_equijoin():
    X, Y = fig2_relations()
    a = skew_join_meta(X, Y, "B", FIG2_Q, cost=UNIT)
    b = equijoin_meta(X, Y, "B", FIG2_Q, cost=UNIT)
    assert a.outputs == b.outputs and a.replication == b.replication
    assert a.ledger.channels == b.ledger.channels


def test_heavy_keys():
    X, Y = heavy_pair()
    assert JoinSpec((X, Y)).heavy_keys("B", 8) == [b"b1"]
    assert JoinSpec((X, Y)).heavy_keys("B", 16) == []


def test_hashed_upload_on_fixture():
    X, Y = fig2_relations(key_bits=64)
    res = hashed_join_meta(X, Y, "B")
    assert res.ledger["user_to_map"] == 48 == 2 * 3 * 8
    assert res.output_set() == sql_join([X, Y])[0]


def test_hashed_self_join_everything_participates():
    X = Relation.from_rows("X", ("a", "B"), [("p", "k")] * 5)
    Y = Relation.from_rows("Y", ("a", "B"), [("p", "k")] * 5)
    res = hashed_join_meta(X, Y, "B")
    assert len(res.outputs) == 25
    assert len(res.fetched_origins()) == 10


def test_hashed_forced_collision():
    X, Y = two_way(5, distinct=12)
    res = hashed_join_meta(X, Y, "B", digester=HashConfig(1, 1))
    assert res.rehash_count >= 1
    assert res.output_set() == sql_join([X, Y])[0]


def test_dominating_attributes():
    rels = [Relation(n, a, ()) for n, a in (("U", "ABCD"), ("V", "ABDE"), ("W", "DEF"), ("X", "FGH"))]
    assert find_dominating_attrs(rels) == set("ABDEF")
    assert find_dominating_attrs([Relation("P", "AB", ()), Relation("Q", "CD", ())]) == set()


@given(st.lists(st.sets(st.sampled_from("ABCDEFG"), min_size=1), min_size=2, max_size=6))
def test_dominating_attributes_count(schemas):
    rels = [Relation(f"R{i}", tuple(sorted(s)), ()) for i, s in enumerate(schemas)]
    brute = {a for a in "ABCDEFG" if sum(a in s for s in schemas) > 1}
    assert find_dominating_attrs(rels) == brute


def test_four_relation_cascade_shape():
    rng = random.Random(1)
    U = keyed("U", ("A", "B", "C", "D"), 8, rng, distinct=2, keys={"A", "B", "D"})
    V = keyed("V", ("A", "B", "D", "E"), 8, rng, distinct=2)
    W = keyed("W", ("D", "E", "F"), 8, rng, distinct=2)
    Xr = keyed("X", ("F", "G", "H"), 8, rng, distinct=2, keys={"F"})
    assert cascade_rounds([U, V, W, Xr]) == (Round("A"), Round("D"), Round("F"))
    res = multiway_join_meta([U, V, W, Xr])
    assert res.rounds_executed == 3
    assert res.output_set() == sql_join([U, V, W, Xr])[0]
    # every record carries one digest per dominating attribute: U has A, B, D
    # but only a size for C, V has four, W three, X just F; 32 tuples -> 15 bits
    assert res.digester.output_bits == 15
    assert res.ledger["user_to_map"] == 8 * (3 + 4 + 3 + 1) * 15


def test_two_relation_cascade_is_hashed_join():
    X, Y = two_way(2)
    a = multiway_join_meta([X, Y])
    b = hashed_join_meta(X, Y, "B")
    assert a.outputs == b.outputs and a.ledger.channels == b.ledger.channels


def test_join_order_by_name():
    rels = chain(3)
    a = multiway_join_meta(rels, join_order=["R1", "R2", "R3", "R4"])
    b = multiway_join_meta(rels)
    assert a.outputs == b.outputs


@given(st.integers(0, 10**6))
def test_multiway_bound_without_fan_out(seed):
    rels = unique_chain(seed)
    res = multiway_join_meta(rels, seed=seed)
    params = {k: v for k, v in measure(res, rels).items() if v is not None}
    assert res.ledger.theorem_relevant <= theorem_bound("multiway", **params)
    assert res.output_set() == sql_join(rels)[0]


def test_multiway_fan_out_exceeds_distinct_tuple_bound():
    # one base tuple reaches several final reducers and is fetched by each
    rels = chain(0, 4, n_max=40, key_bits=64, payload_bits=64, distinct=6)
    res = multiway_join_meta(rels, seed=0)
    m = measure(res, rels)
    fetched = sum(len(per) for per in res.fetched.values())
    assert fetched > m["h"]
    assert res.ledger["user_to_reduce_fetch"] > m["h"] * m["w"]


def test_hierarchical_one_cluster_equals_equijoin():
    X, Y = two_way(4)
    h = hierarchical_equijoin([("site", [X, Y])], "B")
    e = equijoin_meta(X, Y, "B", co_located=True)
    assert h.output_set() == e.output_set()
    assert h.ledger.channels == e.ledger.channels


def test_hierarchical_fixture_by_cluster_objects():
    res = hierarchical_equijoin(fig5_clusters(), "B", 64, mode="meta", global_site="C2",
                                cost=UNIT)
    assert res.ledger.total == 36
    assert res.output_set() == sql_join([r for c in fig5_clusters() for r in c.relations])[0]


@pytest.mark.parametrize("seed", range(5))
def test_hierarchical_three_clusters_match_oracle(seed):
    rng = random.Random(seed)
    rels = [keyed(n, ("B", n.lower()), rng.randint(1, 10), rng, distinct=3) for n in "PQRSTU"]
    clusters = [("C1", rels[:2]), ("C2", rels[2:4]), ("C3", rels[4:])]
    for mode in ("classic", "meta"):
        res = hierarchical_equijoin(clusters, "B", mode=mode)
        assert res.output_set() == sql_join(rels)[0]
