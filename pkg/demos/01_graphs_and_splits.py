"""
Graphs, edge splits, and the observed graph
===========================================

Build a graph from an edge list, split its edges into train/valid/test
with matched negatives, and look at what the training-time "observed"
graph keeps.
"""
import numpy as np

from difflink import build_graph, sample_negatives, split_edges

rng = np.random.default_rng(0)

# a random sparse graph on 40 nodes
n = 40
pairs = rng.integers(0, n, size=(120, 2))
pairs = pairs[pairs[:, 0] != pairs[:, 1]]
graph = build_graph(n, pairs)
print(f"graph: {graph.num_nodes} nodes, {graph.edge_array().shape[0]} edges")
print("degrees:", graph.degrees()[:10], "...")

# 80/10/10 split; the observed graph holds only the training positives,
# so nothing the model sees at training time leaks an evaluation edge
split = split_edges(graph, (0.8, 0.1, 0.1), seed=7)
print("train/valid/test positives:",
      split.train_pos.shape[0], split.valid_pos.shape[0],
      split.test_pos.shape[0])
print("observed graph edges:", split.observed_graph.edge_array().shape[0])

# every part gets an equal number of sampled non-edges, disjoint
# across parts
print("test negatives:", split.test_neg.shape[0])
print("first test pairs:", split.test_pos[:3].tolist(),
      "vs negatives", split.test_neg[:3].tolist())

# negatives can also be drawn directly, excluding any pairs you choose
extra = sample_negatives(graph, 5, seed=1, exclude=split.test_neg)
print("five more non-edges:", extra.tolist())

# splits are pure functions of (graph, ratios, seed)
again = split_edges(graph, (0.8, 0.1, 0.1), seed=7)
assert np.array_equal(split.test_pos, again.test_pos)
assert np.array_equal(split.test_neg, again.test_neg)
print("same seed, same split: True")
