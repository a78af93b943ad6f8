"""Four relations in a chain, joined two at a time.

With unique keys each base tuple lands in at most one output and the ledger
stays under the closed-form bound. Repeated keys multiply intermediate rows,
and a tuple used by several final reducers is fetched by each of them, so the
same bound, written in terms of distinct joining tuples, is overrun.
"""
import random

from metamr import Relation, measure, multiway_join_meta, theorem_bound


def link(i, pairs, rng):
    rows = [(f"A{i}{a}".rjust(8, "0"), f"A{i + 1}{b}".rjust(8, "0"),
             "".join(rng.choice("abcdefgh") for _ in range(8))) for a, b in pairs]
    attrs = (f"A{i}", f"A{i + 1}", f"p{i}")
    return Relation.from_rows(f"R{i + 1}", attrs, rows, sizes=dict.fromkeys(attrs, 64))


def unique_chain(seed, n_max=40):
    rng = random.Random(seed)
    rels = []
    for i in range(4):
        n = rng.randint(1, n_max)
        rels.append(link(i, zip(rng.sample(range(n_max), n), rng.sample(range(n_max), n)), rng))
    return rels


def repeated_chain(seed, n_max=40):
    rng = random.Random(seed)
    d = rng.randint(4, 10)
    return [link(i, [(rng.randrange(d), rng.randrange(d)) for _ in range(rng.randint(1, n_max))], rng)
            for i in range(4)]


def row(label, rels, seed):
    res = multiway_join_meta(rels, seed=seed)
    p = {k: v for k, v in measure(res, rels).items() if v is not None}
    bound = theorem_bound("multiway", **p)
    fetches = sum(len(per) for per in res.fetched.values())
    print(f"{label:8s} outputs={len(res.outputs):5d} h={p['h']:4d} fetches={fetches:5d} "
          f"ledger={res.ledger.theorem_relevant:7d} bound={bound:7d}")
    return res.ledger.theorem_relevant <= bound


within = sum(row("unique", unique_chain(s), s) for s in range(10))
print(within, "of 10 unique-key chains within bound")
over = sum(not row("repeated", repeated_chain(s), s) for s in range(10))
print(over, "of 10 repeated-key chains over bound")
