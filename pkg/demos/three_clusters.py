"""Three clusters, one of them global: partial joins locally, one fetch at the end."""
from metamr import run_hierarchical
from metamr.fixtures import FIG5_Q, fig5_clusters, fig5_global_plan, fig5_topology

topo = fig5_topology()
for cl in fig5_clusters():
    print(cl.site_id, [f"{r.name}:{len(r)}" for r in cl.relations])

classic = run_hierarchical(fig5_clusters(), fig5_global_plan("classic"), topo, FIG5_Q)
meta = run_hierarchical(fig5_clusters(), fig5_global_plan("meta"), topo, FIG5_Q)

# per-round breakdown; cluster rounds are labelled site/roundN
for label, per in sorted(classic.ledger.rounds.items()):
    print(f"{label:16s}", sum(per.values()))
intra = sum(v["map_to_reduce"] for k, v in classic.ledger.rounds.items() if "/round" in k)
print("classic", classic.ledger.total, "of which intra-cluster", intra)
print("meta   ", meta.ledger.total)
assert classic.output_set() == meta.output_set()
print(len(meta.outputs), "output tuples either way")
