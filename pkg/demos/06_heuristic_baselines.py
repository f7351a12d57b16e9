"""
Parameter-free baselines
========================

Common neighbors, Adamic-Adar, and personalized PageRank scored on the
observed graph. Any learned model should be read against these numbers.
"""
import numpy as np

from difflink import Heuristic, ScoredPairs, auc, score_pairs, split_edges
from difflink.datasets import yeast_like

graph = yeast_like(seed=0)
print(f"graph: {graph.num_nodes} nodes, {graph.edge_array().shape[0]} edges")

split = split_edges(graph, (0.85, 0.05, 0.10), seed=0)
pairs = np.concatenate([split.test_pos, split.test_neg])
n_pos = split.test_pos.shape[0]
print(f"scoring {pairs.shape[0]} test pairs ({n_pos} positive)\n")

for method in Heuristic:
    scores = score_pairs(split.observed_graph, pairs, method)
    value = auc(ScoredPairs(scores[:n_pos], scores[n_pos:]))
    print(f"{method.value:>4}: test AUC {value:.4f}")

# the scores themselves are interpretable; compare a true edge against
# a random non-edge
cn = score_pairs(split.observed_graph, pairs[[0, -1]], Heuristic.CN)
print(f"\ncommon neighbors, first positive vs last negative: "
      f"{cn[0]:.0f} vs {cn[1]:.0f}")
