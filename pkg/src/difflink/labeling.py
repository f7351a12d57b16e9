"""Structural node labels for enclosing subgraphs and feature augmentation.

Labels mark each subgraph node's role relative to the target link. The
one-hot label block is prepended to raw node features (implicit all-ones
column when the graph is unattributed), giving every record row the layout
[one-hot label | raw features].
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sampling import Subgraph, UNREACHABLE


class LabelScheme(str, Enum):
    ZERO_ONE = "zero_one"
    DRNL = "drnl"


def zero_one_labels(subgraph: Subgraph) -> np.ndarray:
    """Label 1 for the two target nodes, 0 for everyone else."""
    labels = np.zeros(subgraph.num_nodes, dtype=np.int64)
    labels[0] = labels[1] = 1
    return labels


def drnl_labels(subgraph: Subgraph) -> np.ndarray:
    """Double-radius labels from hop distances to the two target nodes.

    Distances are taken inside the link-removed subgraph with the opposite
    target masked out. With du, dv the two distances and s = du + dv:

        label = 1 + min(du, dv) + (s // 2) * ((s // 2) + (s % 2) - 1)

    Targets get label 1; nodes unreachable from either target get 0.
    """
    n = subgraph.num_nodes
    du = _masked_dist(subgraph, src=0, blocked=1)
    dv = _masked_dist(subgraph, src=1, blocked=0)
    labels = np.zeros(n, dtype=np.int64)
    ok = (du != UNREACHABLE) & (dv != UNREACHABLE)
    d_min = np.minimum(du, dv).astype(np.int64)
    s = (du + dv).astype(np.int64)
    half = s // 2
    z = 1 + d_min + half * (half + s % 2 - 1)
    labels[ok] = z[ok]
    labels[0] = labels[1] = 1
    return labels


def _masked_dist(subgraph: Subgraph, src: int, blocked: int) -> np.ndarray:
    from .sampling import _bfs_from
    return _bfs_from(subgraph.indptr, subgraph.indices, subgraph.num_nodes,
                     src, blocked=blocked)


@dataclass(frozen=True, eq=False)
class LabeledFeatures:
    """Augmented node-feature matrix for one subgraph.

    ``matrix`` is (num_nodes, label_dim + raw_dim) float32; the first
    ``label_dim`` columns are the one-hot label block.
    """

    matrix: np.ndarray
    scheme: LabelScheme
    label_dim: int


def augment_features(subgraph: Subgraph, features: np.ndarray | None,
                     scheme: LabelScheme = LabelScheme.ZERO_ONE,
                     label_cap: int = 100,
                     label_dim: int | None = None) -> LabeledFeatures:
    """Prepend a one-hot label block to the subgraph's raw node features.

    ``features`` is the parent graph's feature matrix (rows are gathered by
    global id) or None for an implicit all-ones column. Labels above
    ``label_cap`` clamp to the cap. The one-hot width defaults to
    min(max observed label, label_cap) + 1; pass ``label_dim`` to pin a
    fixed width across subgraphs.
    """
    scheme = LabelScheme(scheme)
    if scheme is LabelScheme.ZERO_ONE:
        labels = zero_one_labels(subgraph)
    else:
        labels = drnl_labels(subgraph)
    labels = np.minimum(labels, label_cap)
    if label_dim is None:
        label_dim = int(labels.max()) + 1
    elif labels.max() >= label_dim:
        raise ValueError(f"label {int(labels.max())} does not fit label_dim={label_dim}")
    n = subgraph.num_nodes
    onehot = np.zeros((n, label_dim), dtype=np.float32)
    onehot[np.arange(n), labels] = 1.0
    if features is None:
        raw = np.ones((n, 1), dtype=np.float32)
    else:
        raw = np.asarray(features, dtype=np.float32)[subgraph.global_ids]
    return LabeledFeatures(np.concatenate([onehot, raw], axis=1), scheme, label_dim)


def label_dim_for(scheme: LabelScheme, label_cap: int) -> int:
    """Fixed one-hot width used by the record pipeline for a scheme.

    Zero-one always occupies two columns; double-radius occupies
    label_cap + 1 so every record in a dataset shares one row width.
    """
    scheme = LabelScheme(scheme)
    if scheme is LabelScheme.ZERO_ONE:
        return 2
    return label_cap + 1
