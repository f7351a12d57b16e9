"""Sparse undirected graphs: construction, file IO, splits, neighborhood queries.

Graphs are immutable and stored in compressed sparse row form with sorted
neighbor lists, no self-loops and no duplicate edges. Node ids are dense
0-based integers. All randomized operations take an explicit integer seed
and are deterministic given that seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Malformed edge-list or feature file."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph in CSR form, optionally with dense node features.

    ``indices[indptr[u]:indptr[u + 1]]`` is the sorted neighbor list of
    node ``u``. ``features`` is ``(num_nodes, d)`` float32 or None.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray | None = None

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.indices.shape[0] // 2

    @property
    def feature_dim(self) -> int:
        """Width of the feature matrix, 0 if the graph is unattributed."""
        return 0 if self.features is None else self.features.shape[1]

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor ids of ``u`` (a view, do not mutate)."""
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def degrees(self) -> np.ndarray:
        """All node degrees as an int64 array."""
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        k = np.searchsorted(nbrs, v)
        return bool(k < nbrs.shape[0] and nbrs[k] == v)

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 2) int64 array with u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        """Adjacency matrix as scipy CSR with unit weights."""
        data = np.ones(self.indices.shape[0], dtype=dtype)
        return sp.csr_matrix(
            (data, self.indices.astype(np.int64), self.indptr),
            shape=(self.num_nodes, self.num_nodes),
        )

    def same_structure(self, other: "Graph") -> bool:
        """True if both graphs have identical node count and adjacency."""
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


def build_graph(num_nodes: int, edges, features: np.ndarray | None = None) -> Graph:
    """Build a Graph from an iterable of (u, v) pairs.

    Self-loops are dropped, duplicates and orientation collapse to a single
    undirected edge. Ids must lie in [0, num_nodes).
    """
    if num_nodes <= 0:
        raise ValueError("num_nodes must be positive")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                   dtype=np.int64).reshape(-1, 2)
    if e.size:
        if e.min() < 0 or e.max() >= num_nodes:
            raise ValueError("edge endpoint out of range")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keep = lo != hi
        lo, hi = lo[keep], hi[keep]
        enc = np.unique(lo * num_nodes + hi)
        lo, hi = enc // num_nodes, enc % num_nodes
    else:
        lo = hi = np.zeros(0, dtype=np.int64)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
    if features is not None:
        features = np.asarray(features, dtype=np.float32)
        if features.ndim != 2 or features.shape[0] != num_nodes:
            raise ValueError("features must be (num_nodes, d)")
    return Graph(num_nodes, indptr, dst.astype(np.int32), features)


def load_edge_list(path, comment_prefix: str = "#",
                   num_nodes: int | None = None) -> Graph:
    """Parse a whitespace-separated edge list file into a Graph.

    Blank lines and lines starting with ``comment_prefix`` are skipped.
    Node count defaults to max id + 1; ``num_nodes`` may widen it (useful
    when trailing nodes are isolated).
    """
    path = Path(path)
    pairs = []
    max_id = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith(comment_prefix):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected two node ids, got {raw.rstrip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(
                    f"{path}:{lineno}: non-integer node id in {raw.rstrip()!r}") from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative node id")
            max_id = max(max_id, u, v)
            if u != v:
                pairs.append((u, v))
    if not pairs:
        raise GraphFormatError(f"{path}: empty edge set")
    n = max_id + 1
    if num_nodes is not None:
        if num_nodes < n:
            raise GraphFormatError(
                f"{path}: num_nodes={num_nodes} smaller than max id {max_id}")
        n = num_nodes
    return build_graph(n, np.asarray(pairs, dtype=np.int64))


def save_edge_list(graph: Graph, path) -> None:
    """Write one 'u v' line per undirected edge; round-trips with load_edge_list."""
    edges = graph.edge_array()
    with open(path, "w") as fh:
        fh.write(f"# undirected edge list: {graph.num_nodes} nodes, {len(edges)} edges\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")


def load_features(path, graph: Graph) -> Graph:
    """Attach a dense node-feature matrix read from a text file.

    One row per node, values separated by commas or whitespace. Row count
    must equal ``graph.num_nodes`` and all rows must have equal width.
    """
    path = Path(path)
    rows = []
    width = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            vals = line.replace(",", " ").split()
            try:
                row = [float(x) for x in vals]
            except ValueError:
                raise GraphFormatError(
                    f"{path}:{lineno}: non-numeric feature value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GraphFormatError(
                    f"{path}:{lineno}: row has {len(row)} values, expected {width}")
            rows.append(row)
    if len(rows) != graph.num_nodes:
        raise GraphFormatError(
            f"{path}: {len(rows)} feature rows for {graph.num_nodes} nodes")
    feats = np.asarray(rows, dtype=np.float32)
    return Graph(graph.num_nodes, graph.indptr, graph.indices, feats)


def _encode_pairs(pairs: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    return lo * n + hi


def sample_negatives(graph: Graph, count: int, seed: int, exclude=None) -> np.ndarray:
    """Sample ``count`` distinct non-edges of ``graph`` uniformly at random.

    ``exclude`` is an optional (k, 2) array of extra forbidden pairs.
    Deterministic given ``seed``; raises ValueError when fewer than ``count``
    candidate pairs exist.
    """
    n = graph.num_nodes
    total_pairs = n * (n - 1) // 2
    forbidden = set(_encode_pairs(graph.edge_array(), n).tolist())
    if exclude is not None:
        ex = np.asarray(exclude, dtype=np.int64).reshape(-1, 2)
        if ex.size:
            ex = ex[ex[:, 0] != ex[:, 1]]
            forbidden.update(_encode_pairs(ex, n).tolist())
    available = total_pairs - len(forbidden)
    if count > available:
        raise ValueError(
            f"requested {count} negatives but only {available} non-edges available")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    rng = np.random.default_rng(seed)
    forbidden_sorted = np.fromiter(forbidden, dtype=np.int64, count=len(forbidden))
    forbidden_sorted.sort()

    # Dense enumeration when rejection would stall (graph nearly complete).
    if count > available // 2 and total_pairs <= 20_000_000:
        iu, ju = np.triu_indices(n, k=1)
        enc = iu.astype(np.int64) * n + ju
        mask = np.ones(enc.shape[0], dtype=bool)
        pos = np.searchsorted(enc, forbidden_sorted)
        mask[pos] = False
        cands = enc[mask]
        chosen = rng.choice(cands, size=count, replace=False)
        return np.stack([chosen // n, chosen % n], axis=1)

    out = []
    seen = set()
    while len(out) < count:
        batch = max(1024, 2 * (count - len(out)))
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        ok = u != v
        u, v = u[ok], v[ok]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        enc = lo * n + hi
        if forbidden_sorted.size:
            idx = np.minimum(np.searchsorted(forbidden_sorted, enc),
                             forbidden_sorted.shape[0] - 1)
            is_edge = forbidden_sorted[idx] == enc
        else:
            is_edge = np.zeros(enc.shape[0], dtype=bool)
        for e in enc[~is_edge]:
            e = int(e)
            if e in seen:
                continue
            seen.add(e)
            out.append(e)
            if len(out) == count:
                break
    out = np.asarray(out, dtype=np.int64)
    return np.stack([out // n, out % n], axis=1)


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    """Train/valid/test partition of a graph's edges plus sampled negatives.

    ``observed_graph`` is the input graph with validation and test positives
    removed; it is the only graph later stages are allowed to read.
    """

    observed_graph: Graph
    train_pos: np.ndarray
    valid_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray
    valid_neg: np.ndarray
    test_neg: np.ndarray
    seed: int
    ratios: tuple[float, float, float]

    def positives(self, name: str) -> np.ndarray:
        return {"train": self.train_pos, "valid": self.valid_pos,
                "test": self.test_pos}[name]

    def negatives(self, name: str) -> np.ndarray:
        return {"train": self.train_neg, "valid": self.valid_neg,
                "test": self.test_neg}[name]


def split_edges(graph: Graph, ratios=(0.85, 0.05, 0.10), seed: int = 0) -> EdgeSplit:
    """Shuffle edges with ``seed`` and partition into train/valid/test.

    Valid and test receive floor(ratio * m) edges, train the remainder.
    An equal number of negatives is sampled per split; negative sets are
    disjoint across splits and never coincide with an edge of the full
    graph. Raises ValueError if any part would be empty.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive fractions summing to 1, got {ratios}")
    edges = graph.edge_array()
    m = edges.shape[0]
    n_valid = int(ratios[1] * m)
    n_test = int(ratios[2] * m)
    n_train = m - n_valid - n_test
    if min(n_train, n_valid, n_test) == 0:
        raise ValueError(f"split of {m} edges with ratios {ratios} leaves an empty part")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    train_pos = edges[perm[:n_train]]
    valid_pos = edges[perm[n_train:n_train + n_valid]]
    test_pos = edges[perm[n_train + n_valid:]]
    observed = build_graph(graph.num_nodes, train_pos, features=graph.features)
    s0, s1, s2 = (int(x) for x in np.random.SeedSequence(seed).generate_state(3))
    train_neg = sample_negatives(graph, n_train, s0)
    valid_neg = sample_negatives(graph, n_valid, s1, exclude=train_neg)
    test_neg = sample_negatives(graph, n_test, s2,
                                exclude=np.concatenate([train_neg, valid_neg]))
    return EdgeSplit(observed, train_pos, valid_pos, test_pos,
                     train_neg, valid_neg, test_neg, seed, ratios)


_SPLIT_PARTS = ("train_pos", "valid_pos", "test_pos",
                "train_neg", "valid_neg", "test_neg")


def save_split(split: EdgeSplit, out_dir) -> None:
    """Write a split to a directory: edge lists per part plus a JSON manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_edge_list(split.observed_graph, out_dir / "observed.txt")
    counts = {}
    for name in _SPLIT_PARTS:
        arr = getattr(split, name)
        counts[name] = int(arr.shape[0])
        with open(out_dir / f"{name}.txt", "w") as fh:
            for u, v in arr:
                fh.write(f"{u} {v}\n")
    manifest = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "num_nodes": split.observed_graph.num_nodes,
        "counts": counts,
    }
    with open(out_dir / "split.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _read_pairs(path) -> np.ndarray:
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b = line.split()
            pairs.append((int(a), int(b)))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.asarray(pairs, dtype=np.int64)


def load_split(in_dir, features: np.ndarray | None = None) -> EdgeSplit:
    """Read back a split written by save_split; optionally reattach features."""
    in_dir = Path(in_dir)
    with open(in_dir / "split.json") as fh:
        manifest = json.load(fh)
    observed = load_edge_list(in_dir / "observed.txt",
                              num_nodes=int(manifest["num_nodes"]))
    if features is not None:
        observed = Graph(observed.num_nodes, observed.indptr, observed.indices,
                         np.asarray(features, dtype=np.float32))
    parts = {}
    for name in _SPLIT_PARTS:
        arr = _read_pairs(in_dir / f"{name}.txt")
        if arr.shape[0] != manifest["counts"][name]:
            raise GraphFormatError(f"{in_dir}: {name} count mismatch with split.json")
        parts[name] = arr
    return EdgeSplit(observed, seed=int(manifest["seed"]),
                     ratios=tuple(manifest["ratios"]), **parts)


def normalized_adjacency(graph: Graph) -> sp.csr_matrix:
    """Symmetric degree-normalized adjacency with self-loops.

    Returns D^{-1/2} (A + I) D^{-1/2} where D is the degree matrix of A + I.
    Rows of the result sum to at most 1 and the matrix stays symmetric.
    """
    n = graph.num_nodes
    at = graph.adjacency(np.float64) + sp.identity(n, format="csr")
    deg = np.asarray(at.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    out = at.multiply(dinv[:, None]).multiply(dinv[None, :])
    return sp.csr_matrix(out)


def common_neighbors(graph: Graph, u: int, v: int) -> np.ndarray:
    """Sorted ids adjacent to both u and v. Requires u != v."""
    n = graph.num_nodes
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"node id out of range: ({u}, {v})")
    if u == v:
        raise ValueError("common_neighbors requires two distinct nodes")
    return np.intersect1d(graph.neighbors(u), graph.neighbors(v),
                          assume_unique=True)
