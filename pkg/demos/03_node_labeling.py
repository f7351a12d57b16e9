"""
Structural node labels
======================

Records start from a per-node one-hot label describing each subgraph
node's position relative to the candidate link, optionally followed by
the node's raw features.
"""
from difflink import (LabelScheme, augment_features, build_graph,
                      drnl_labels, extract_h_hop, zero_one_labels)

# a 5-path: 0 - 1 - 2 - 3 - 4, candidate link (1, 3)
graph = build_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
sub = extract_h_hop(graph, 1, 3, h=2)
print("subgraph nodes:", sub.global_ids.tolist())

# zero-one: targets get 1, everyone else 0
print("zero-one:", zero_one_labels(sub).tolist())

# double-radius: distances to both targets, each measured with the other
# target blocked, folded into a single integer
print("double-radius:", drnl_labels(sub).tolist())

# the label becomes a one-hot prefix; with no node features a constant
# ones column stands in so diffusion still counts walks
feats = augment_features(sub, None, LabelScheme.ZERO_ONE)
print("feature matrix (one-hot label | ones):")
print(feats.matrix)

# a leaf whose only route to one target runs through the other is
# unreachable under the double-radius masking and keeps label 0
star = build_graph(4, [(0, 1), (0, 2), (0, 3)])
sub2 = extract_h_hop(star, 0, 1, h=1)
print("star nodes:", sub2.global_ids.tolist(),
      "labels:", drnl_labels(sub2).tolist())
