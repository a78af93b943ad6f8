"""How savings move with the share of tuples that find a partner.

Fixed n and tuple width, growing key domain: as keys spread out fewer tuples
join, and the meta job gets cheaper while the classic job stays flat.
"""
import numpy as np

from metamr import GenSpec, equijoin_classic, equijoin_meta, gen_relations, measure, theorem_bound

n, c, w = 400, 64, 1024
domains = np.unique(np.geomspace(1, 4000, 12).astype(int))

rows = []
for d in domains:
    X, Y = gen_relations(GenSpec(n=n, c=c, w=w, distinct_keys=int(d), seed=7))
    meta, classic = equijoin_meta(X, Y, "B"), equijoin_classic(X, Y, "B")
    p = measure(meta, [X, Y])
    rows.append((d, p["h"], meta.ledger.theorem_relevant, theorem_bound("two-way", **{
        k: p[k] for k in ("n", "c", "w", "h")}), classic.ledger.total))

table = np.array(rows, dtype=float)
print(f"{'keys':>6} {'h':>5} {'meta':>9} {'bound':>9} {'classic':>9} {'ratio':>6}")
for d, h, got, bound, cl in table:
    print(f"{d:6.0f} {h:5.0f} {got:9.0f} {bound:9.0f} {cl:9.0f} {got / cl:6.3f}")

assert (table[:, 2] <= table[:, 3]).all()
# the classic cost ignores who joins
print("classic spread", np.ptp(table[:, 4]))
