"""X(A,B) joined with Y(B,C): moving keys first, payloads only where they join."""
from metamr import CostModel, emit_report, equijoin_classic, equijoin_meta
from metamr.fixtures import FIG2_Q, fig2_relations

X, Y = fig2_relations()
unit = CostModel(unit_cost=True)

# every tuple costs one unit; keys and signals are free
classic = equijoin_classic(X, Y, "B", FIG2_Q, cost=unit)
meta = equijoin_meta(X, Y, "B", FIG2_Q, cost=unit)
print("classic total  ", classic.ledger.total)
print("meta fetch     ", meta.ledger["user_to_reduce_fetch"])
print("meta records   ", meta.ledger.metadata_records)

# which originals made the trip
for reducer, origins in sorted(meta.fetched.items()):
    print(reducer, sorted((o.relation, o.tuple_id) for o in origins))

# same join priced in bits: 16-bit keys, so metadata is no longer free
X16, Y16 = fig2_relations(key_bits=16)
bits = equijoin_meta(X16, Y16, "B")
print({ch: v for ch, v in bits.ledger.channels.items() if v})

report = emit_report(meta, {"n": 3, "c": 0, "w": 1, "h": 4}, baseline=classic,
                     bound_kinds=("two-way", "classic-two-way"))
print("savings", report.savings, "bounds", report.bounds)
