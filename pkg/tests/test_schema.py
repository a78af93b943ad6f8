import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from metamr import (MappingSchema, OversizedGroup, SchemaInfeasible, bin_pack_assign,
                    key_group_assign, make_meta, skew_assign, validate_schema)
from metamr.fixtures import fig2_relations
from metamr.schema import first_fit_decreasing

from instances import keyed
from oracles import covered_pairs, exact_bins


def fig2_metas():
    X, Y = fig2_relations()
    return [make_meta(t, r, {"B"}) for r in (X, Y) for t in r.tuples]


def test_single_reducer_for_b1_is_valid():
    metas = [m for m in fig2_metas() if m.key_material.value.payload == b"b1"]
    sizes = {m.origin: m.original_bits for m in metas}
    xs = [m.origin for m in metas if m.origin.relation == "X"]
    ys = [m.origin for m in metas if m.origin.relation == "Y"]
    rep = validate_schema(MappingSchema((frozenset(sizes),)), sizes, 4,
                          itertools.product(xs, ys))
    assert rep.valid and rep.replication_rate == 1


def test_oversized_input_is_a_violation():
    rep = validate_schema(MappingSchema((frozenset({"a"}),)), {"a": 5}, 4)
    assert rep.capacity_violations == [(0, 5)]
    assert not rep.valid


def test_uncovered_pairs_match_enumeration():
    rng = random.Random(4)
    for _ in range(30):
        ids = list(range(rng.randint(2, 20)))
        reducers = tuple(frozenset(rng.sample(ids, rng.randint(1, len(ids))))
                         for _ in range(rng.randint(0, 5)))
        pairs = [(a, b) for a, b in itertools.combinations(ids, 2) if rng.random() < 0.5]
        rep = validate_schema(MappingSchema(reducers), dict.fromkeys(ids, 1), 100, pairs)
        hit = covered_pairs(reducers)
        assert rep.uncovered == {p for p in pairs if p not in hit}


def test_key_group_on_fixture():
    s = key_group_assign(fig2_metas(), 4)
    assert [sorted((o.relation, o.tuple_id) for o in r) for r in s.reducers] == [
        [("X", 0), ("X", 1), ("Y", 0), ("Y", 1)], [("X", 2)], [("Y", 2)]]
    assert len(key_group_assign([], 4)) == 0
    with pytest.raises(OversizedGroup):
        key_group_assign(fig2_metas(), 3)


def test_key_group_counts_distinct_keys():
    rng = random.Random(5)
    R = keyed("R", ("a", "B"), 100, rng, distinct=40)
    metas = [make_meta(t, R, {"B"}) for t in R.tuples]
    s = key_group_assign(metas, 10**9)
    assert len(s) == len(Counter(t.values[1] for t in R.tuples))
    assert validate_schema(s, {m.origin: m.original_bits for m in metas}, 10**9).valid


def test_skew_two_by_two():
    xs = {("x", i): 2 for i in range(4)}
    ys = {("y", i): 2 for i in range(4)}
    s = skew_assign(xs, ys, 8)
    assert len(s) == 4
    rep = validate_schema(s, {**xs, **ys}, 8, itertools.product(xs, ys))
    assert rep.valid and rep.replication_rate == 2


def test_skew_small_group_is_one_reducer():
    s = skew_assign({"x": 1}, {"y": 2}, 8)
    assert s.reducers == (frozenset({"x", "y"}),)


def test_skew_rejects_inputs_above_half_q():
    with pytest.raises(SchemaInfeasible):
        skew_assign({"x": 5}, {"y": 4}, 8)


@given(st.lists(st.integers(1, 50), min_size=1, max_size=50), st.integers(0, 49), st.integers(100, 400))
def test_skew_always_valid(sizes, split, q):
    split = min(split, len(sizes))
    xs = {("x", i): s for i, s in enumerate(sizes[:split])}
    ys = {("y", i): s for i, s in enumerate(sizes[split:])}
    s = skew_assign(xs, ys, q)
    rep = validate_schema(s, {**xs, **ys}, q, itertools.product(xs, ys))
    assert rep.valid


def test_bin_pack_half_q_inputs():
    s = bin_pack_assign(dict.fromkeys(range(6), 5), 10, 2)
    assert len(s) == 15
    assert validate_schema(s, dict.fromkeys(range(6), 5), 10,
                           itertools.combinations(range(6), 2)).valid
    assert len(bin_pack_assign({"only": 3}, 10)) == 0


@given(st.lists(st.integers(1, 20), max_size=50), st.sampled_from([2, 3, 4, 6]))
def test_bin_pack_always_valid(sizes, k):
    q = 20 * k
    inputs = dict(enumerate(sizes))
    s = bin_pack_assign(inputs, q, k)
    assert validate_schema(s, inputs, q, itertools.combinations(inputs, 2)).valid


def test_bin_pack_rejects_large_inputs():
    with pytest.raises(SchemaInfeasible):
        bin_pack_assign({"a": 6}, 10, 2)


@given(st.lists(st.integers(1, 10), max_size=12))
def test_ffd_within_twice_optimal(sizes):
    bins = first_fit_decreasing(dict(enumerate(sizes)), 10)
    assert len(bins) <= 2 * exact_bins(sizes, 10) + 1
    assert sorted(i for b in bins for i in b) == list(range(len(sizes)))
    assert all(sum(sizes[i] for i in b) <= 10 for b in bins)


def test_ffd_ties_break_by_id():
    assert first_fit_decreasing({"b": 3, "a": 3, "c": 4}, 7) == [["c", "a"], ["b"]]
