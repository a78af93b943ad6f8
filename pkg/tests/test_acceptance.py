"""Acceptance gate: one test per criterion, each printing a pass/fail line."""
from __future__ import annotations

import itertools
import json
import random
import time
from contextlib import contextmanager

import pytest

from metamr import (AttributeValue, CostModel, GenSpec, HashConfig, JobPlan, Relation, Round,
                    bin_pack_assign, digest, equijoin_classic, equijoin_meta, gen_relations,
                    hashed_join_meta, hierarchical_equijoin, key_group_assign, knn_meta,
                    make_meta, measure, multiway_join_meta, required_digest_bits,
                    run_hierarchical, shortest_path_meta, skew_assign, skew_join_meta,
                    theorem_bound, validate_schema)
from metamr.cli import main
from metamr.fixtures import (FIG2_Q, FIG5_Q, fig2_relations, fig5_clusters, fig5_global_plan,
                             fig5_topology, path)

from instances import chain, keyed, two_way
from oracles import bfs_distance, ceil_3log2, knn_oracle, sql_join

UNIT = CostModel(unit_cost=True)
RESULTS: list[str] = []
FIXTURE_SEED = 0


@contextmanager
def criterion(number, title):
    start = time.perf_counter()
    notes: dict = {}
    try:
        yield notes
    except BaseException as exc:
        RESULTS.append(f"FAIL criterion {number} ({title}): {type(exc).__name__}: {exc}")
        print(RESULTS[-1])
        raise
    detail = ", ".join(f"{k}={v}" for k, v in notes.items())
    RESULTS.append(f"PASS criterion {number} ({title}) in {time.perf_counter() - start:.2f}s"
                   + (f": {detail}" if detail else ""))
    print(RESULTS[-1])


def test_criterion_1_two_relation_golden():
    with criterion(1, "two-relation golden") as notes:
        start = time.perf_counter()
        X, Y = fig2_relations()
        classic = equijoin_classic(X, Y, "B", FIG2_Q, cost=UNIT)
        meta = equijoin_meta(X, Y, "B", FIG2_Q, cost=UNIT)
        elapsed = time.perf_counter() - start
        assert classic.ledger.total == 12
        assert meta.ledger["user_to_reduce_fetch"] == 4
        assert meta.ledger.by_kind["data"] == 4
        # the metadata constant is reported apart from the data cost
        assert meta.ledger.by_kind["meta"] == 0 and meta.ledger.metadata_records == 12
        bits = equijoin_meta(*fig2_relations(key_bits=16), "B")
        assert bits.ledger.by_kind["meta"] > 0 and bits.ledger["user_to_reduce_fetch"] == 4 * 17
        assert elapsed < 1.0
        notes.update(classic=classic.ledger.total, meta_fetch=4, seconds=round(elapsed, 3))


def test_criterion_2_three_cluster_golden():
    with criterion(2, "three-cluster golden") as notes:
        start = time.perf_counter()
        topo = fig5_topology()
        classic = run_hierarchical(fig5_clusters(), fig5_global_plan("classic"), topo, FIG5_Q)
        meta = run_hierarchical(fig5_clusters(), fig5_global_plan("meta"), topo, FIG5_Q)
        elapsed = time.perf_counter() - start
        intra = sum(v["map_to_reduce"] for k, v in classic.ledger.rounds.items() if "/round" in k)
        assert classic.ledger.total == 208
        assert intra == 76 and classic.ledger.total - intra == 132
        assert meta.ledger.total == 36
        assert elapsed < 1.0
        with open(path("fig5", "RECONSTRUCTION.txt"), encoding="utf-8") as fh:
            assert "what was reconstructed" in fh.read().lower()
        notes.update(classic=208, intra=intra, meta=36, seconds=round(elapsed, 3))


# ---------------------------------------------------------------------------
# criterion 3

def _two_way_instance(seed):
    return two_way(seed, n_max=200, key_bits=64, payload_bits=128,
                   distinct=random.Random(seed).randint(4, 40))


def _skew_instance(seed):
    rng = random.Random(seed)
    spec = GenSpec(n=rng.randint(20, 200), c=64, w=256, distinct_keys=rng.randint(2, 20),
                   heavy_hitters=1, heavy_share=rng.uniform(0.3, 0.8), seed=seed)
    X, Y = gen_relations(spec)
    q = 256 * rng.randint(4, 16)
    return X, Y, q


def _check(kind, result, relations):
    params = {k: v for k, v in measure(result, relations).items() if v is not None}
    bound = theorem_bound(kind, **params)
    return result.ledger.theorem_relevant <= bound, result.ledger.theorem_relevant, bound


def test_criterion_3_bounds_hold():
    with criterion(3, "cost bounds") as notes:
        start = time.perf_counter()
        violations = []
        counts = dict.fromkeys(("two-way", "skew", "hashed", "multiway"), 0)
        split = 0
        for seed in range(100):
            X, Y = _two_way_instance(seed)
            ok, got, bound = _check("two-way", equijoin_meta(X, Y, "B"), [X, Y])
            counts["two-way"] += 1
            if not ok:
                violations.append(("two-way", seed, got, bound))

            X, Y, q = _skew_instance(seed)
            res = skew_join_meta(X, Y, "B", q)
            split += any(rate > 1 for rate in res.replication.values())
            ok, got, bound = _check("skew", res, [X, Y])
            counts["skew"] += 1
            if not ok:
                violations.append(("skew", seed, got, bound))

            X, Y = _two_way_instance(1000 + seed)
            ok, got, bound = _check("hashed", hashed_join_meta(X, Y, "B", seed=seed), [X, Y])
            counts["hashed"] += 1
            if not ok:
                violations.append(("hashed", seed, got, bound))

            rels = chain(seed, 4, n_max=40, key_bits=64, payload_bits=64,
                         distinct=random.Random(seed).randint(4, 10))
            ok, got, bound = _check("multiway", multiway_join_meta(rels, seed=seed), rels)
            counts["multiway"] += 1
            if not ok:
                violations.append(("multiway", seed, got, bound))
        elapsed = time.perf_counter() - start
        per_kind = {k: sum(v[0] == k for v in violations) for k in counts}
        assert not violations, f"violations per theorem {per_kind}; first {violations[:3]}"
        assert min(counts.values()) >= 100
        assert split >= 50, "skew instances should mostly need replicated reducers"
        assert elapsed < 60
        notes.update(instances=sum(counts.values()), violations=0, split_skew=split,
                     seconds=round(elapsed, 2))


# ---------------------------------------------------------------------------
# criterion 4

def _collides(X, Y, cfg):
    """Whether some X key and a different Y key share a digest under ``cfg``."""
    xs = {X.value(t, "B") for t in X.tuples}
    ys = {Y.value(t, "B") for t in Y.tuples}
    return any(x != y and digest(x, cfg) == digest(y, cfg) for x in xs for y in ys)


def test_criterion_4_oracle_equivalence():
    with criterion(4, "oracle equivalence") as notes:
        mismatches = []
        tally: dict[str, int] = {}

        def check(name, ok):
            tally[name] = tally.get(name, 0) + 1
            if not ok:
                mismatches.append((name, tally[name]))

        for seed in range(50):
            X, Y = two_way(seed, n_max=300)
            expected = sql_join([X, Y])[0]
            check("equijoin", equijoin_meta(X, Y, "B").output_set() == expected)

            X, Y, q = _skew_instance(seed)
            check("skew", skew_join_meta(X, Y, "B", q).output_set() == sql_join([X, Y])[0])

            X, Y = two_way(500 + seed, n_max=300)
            expected = sql_join([X, Y])[0]
            check("hashed", hashed_join_meta(X, Y, "B", seed=seed).output_set() == expected)
            forced = hashed_join_meta(X, Y, "B", digester=HashConfig(seed, 1))
            check("hashed-collision", forced.output_set() == expected
                  and (forced.rehash_count >= 1) == _collides(X, Y, HashConfig(seed, 1)))

            rels = chain(seed, 4, n_max=40, distinct=random.Random(seed).randint(3, 8))
            check("cascade-4", multiway_join_meta(rels, seed=seed).output_set() == sql_join(rels)[0])

            rng = random.Random(seed)
            parts = [keyed(n, ("B", n.lower()), rng.randint(1, 12), rng, distinct=4) for n in "PQRSTU"]
            clusters = [("C1", parts[:2]), ("C2", parts[2:4]), ("C3", parts[4:])]
            got = hierarchical_equijoin(clusters, "B", mode="meta", global_site="C2")
            check("hierarchical", got.output_set() == sql_join(parts)[0])

            R = Relation.from_rows("R", ("x", "y", "r"), [
                (str(rng.randint(-40, 40)), str(rng.randint(-40, 40)), f"r{i}") for i in range(40)])
            S = Relation.from_rows("S", ("x", "y", "s"), [
                (str(rng.randint(-40, 40)), str(rng.randint(-40, 40)), f"s{i}") for i in range(120)])
            k = rng.randint(1, 6)
            res = knn_meta(R, S, k, q=rng.choice([1 << 62, 2500]))
            check("knn", res.extras["neighbours"] == knn_oracle(R, S, k, ["x", "y"]))

            from test_workloads import random_graph
            g, names, edges = random_graph(seed)
            res = shortest_path_meta(g, "n00", "n01")
            check("shortest-path", res.extras["distance"] == bfs_distance(names, edges, "n00", "n01"))
        assert not mismatches, mismatches[:5]
        assert min(tally.values()) >= 50
        notes.update(suites=len(tally), instances=sum(tally.values()), mismatches=0)


# ---------------------------------------------------------------------------
# criterion 5

def test_criterion_5_schema_validity():
    with criterion(5, "mapping-schema validity") as notes:
        rng = random.Random(FIXTURE_SEED)
        checked = 0
        for _ in range(200):
            n = rng.randint(1, 50)
            R = keyed("R", ("a", "B"), n, rng, distinct=rng.randint(1, 10),
                      payload_bits=8 * rng.randint(1, 16))
            metas = [make_meta(t, R, {"B"}) for t in R.tuples]
            sizes = {m.origin: m.original_bits for m in metas}
            groups: dict = {}
            for m in metas:
                groups.setdefault(m.key_material, []).append(m.origin)
            q = max(sum(sizes[o] for o in g) for g in groups.values())
            cover = [p for g in groups.values() for p in itertools.combinations(g, 2)]
            assert validate_schema(key_group_assign(metas, q), sizes, q, cover).valid

            split = rng.randint(0, n)
            items = [rng.randint(1, 30) for _ in range(n)]
            xs = {("x", i): s for i, s in enumerate(items[:split])}
            ys = {("y", i): s for i, s in enumerate(items[split:])}
            q = 2 * rng.randint(30, 120)
            s = skew_assign(xs, ys, q)
            assert validate_schema(s, {**xs, **ys}, q, itertools.product(xs, ys)).valid

            k = rng.choice([2, 3, 4])
            inputs = dict(enumerate(items))
            q = 30 * k
            s = bin_pack_assign(inputs, q, k)
            assert validate_schema(s, inputs, q, itertools.combinations(inputs, 2)).valid
            checked += 3
        notes.update(schemas=checked, violations=0)


# ---------------------------------------------------------------------------
# criterion 6

def test_criterion_6_fetch_minimality():
    with criterion(6, "fetch minimality") as notes:
        for seed in range(50):
            X, Y = two_way(seed, n_max=300)
            res = equijoin_meta(X, Y, "B")
            fetched = {(o.relation, o.tuple_id) for o in res.fetched_origins()}
            assert fetched == sql_join([X, Y])[1], seed
        notes.update(instances=50, over_or_under_fetch=0)


# ---------------------------------------------------------------------------
# criterion 7

def test_criterion_7_determinism(tmp_path):
    with criterion(7, "byte-identical reports") as notes:
        runs = 0
        for seed in range(5):
            out = tmp_path / f"g{seed}"
            assert main(["gen", "--n", "400", "--c", "64", "--w", "256", "--distinct", "40",
                         "--heavy", "1", "--seed", str(seed), "--out", str(out)]) == 0
            plan = tmp_path / f"p{seed}.ini"
            plan.write_text(f"[job]\nmode = meta\nhashed = {seed % 2 == 0}\nseed = {seed}\n"
                            "[round1]\nkey = B\nstrategy = skew\n")
            blobs = []
            for workers in ("1", "1", "4"):
                rep = tmp_path / f"r{seed}-{len(blobs)}.json"
                assert main(["run", str(plan), str(out / "X.tsv"), str(out / "Y.tsv"),
                             "--q", "4096", "--report", str(rep), "--workers", workers]) == 0
                blobs.append(rep.read_bytes())
                runs += 1
            assert blobs[0] == blobs[1] == blobs[2]
            json.loads(blobs[0])
        notes.update(runs=runs)


# ---------------------------------------------------------------------------
# criterion 8

def test_criterion_8_digest_width():
    with criterion(8, "digest width") as notes:
        for m in (2, 6, 1024, 10**6):
            assert required_digest_bits(m) == ceil_3log2(m)
        rng = random.Random(FIXTURE_SEED)
        keys = set()
        while len(keys) < 10**4:
            keys.add(rng.randbytes(16))
        cfg = HashConfig(FIXTURE_SEED, required_digest_bits(len(keys)))
        seen = {digest(AttributeValue(k, 128), cfg).value for k in keys}
        collisions = len(keys) - len(seen)
        assert collisions == 0
        X, Y = two_way(3, distinct=12)
        forced = hashed_join_meta(X, Y, "B", digester=HashConfig(FIXTURE_SEED, 1))
        assert forced.rehash_count >= 1
        assert forced.output_set() == sql_join([X, Y])[0]
        notes.update(width=cfg.output_bits, collisions=collisions,
                     forced_rehashes=forced.rehash_count)
