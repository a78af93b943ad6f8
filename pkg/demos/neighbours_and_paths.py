"""Two workloads beyond joins: k nearest neighbours and a shortest path."""
from metamr import knn_meta, shortest_path_meta
from metamr.fixtures import knn_relations, social_graph

R, S = knn_relations()
res = knn_meta(R, S, 3)
print("neighbours", res.extras["neighbours"])
print("partitions", res.extras["partitions"])
print("fetched", sorted((o.relation, o.tuple_id) for o in res.fetched_origins()))
print("fetch bits", res.ledger["user_to_reduce_fetch"], "of",
      sum(sum(v.size_bits for v in t.values) for t in R.tuples + S.tuples), "stored")

# tighter reducers force more partitions, same answer
small = knn_meta(R, S, 3, q=200)
assert small.extras["neighbours"] == res.extras["neighbours"]
print("partitions at q=200", small.extras["partitions"])

g = social_graph()
print(g.kinds())
walk = shortest_path_meta(g, "P1", "P6")
print("path", walk.extras["path"], "distance", walk.extras["distance"])
# only the nodes on the path are ever fetched
print("fetched nodes", len(walk.fetched_origins()), "of", len(g.nodes))
