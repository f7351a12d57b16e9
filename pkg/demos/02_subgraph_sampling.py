"""
Sampling the neighborhood of a candidate link
=============================================

Three ways to pick the nodes a link's record is computed from: the full
h-hop neighborhood, the h-hop neighborhood of a graph power, and the
union of short random walks.
"""
import numpy as np

from difflink import (build_graph, extract_h_hop, graph_power,
                      random_walk_subgraph)

# two hubs joined by a bridge, plus a path hanging off one side
edges = [(0, 1), (0, 2), (0, 3), (1, 2), (4, 5), (4, 6), (5, 6),
         (3, 4), (6, 7), (7, 8), (8, 9)]
graph = build_graph(10, edges)

u, v = 3, 4
sub = extract_h_hop(graph, u, v, h=1)
print("1-hop around the bridge:", sub.global_ids.tolist())
print("distances to u:", sub.dist_to_u.tolist())
print("distances to v:", sub.dist_to_v.tolist())

# the candidate link itself is never part of the extracted subgraph,
# so distances reflect the graph as if the link were unknown
assert not any((a, b) == (0, 1) for a, b in [(u, v)])
sub2 = extract_h_hop(graph, u, v, h=2)
print("2-hop grows to:", sub2.global_ids.tolist())

# the square of the graph connects anything within two steps
g2 = graph_power(graph, 2)
print("edges in G^2:", g2.edge_array().shape[0], "vs G:",
      graph.edge_array().shape[0])

# walk sampling: k walks of length l from each endpoint, at most
# 2*k*l + 2 distinct nodes, reproducible from the seed
walk = random_walk_subgraph(graph, u, v, k=2, l=3, seed=11)
print("walk-sampled nodes:", walk.global_ids.tolist(),
      f"(bound {2 * 2 * 3 + 2})")
same = random_walk_subgraph(graph, u, v, k=2, l=3, seed=11)
assert np.array_equal(walk.global_ids, same.global_ids)
print("same seed, same subgraph: True")
