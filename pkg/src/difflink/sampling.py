"""Per-link subgraph extraction: hop neighborhoods, graph powers, random walks.

Every extractor removes the target edge (u, v) from the returned subgraph,
so positive and negative links are structurally indistinguishable to
downstream stages. Node 0 of a subgraph is always u and node 1 is always v;
remaining nodes appear in ascending global id order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph, build_graph

UNREACHABLE = -1


@dataclass(frozen=True, eq=False)
class Subgraph:
    """Induced subgraph around a target link, in local CSR form.

    ``global_ids[i]`` maps local node i back to the parent graph;
    ``global_ids[0]`` and ``global_ids[1]`` are the link endpoints.
    ``dist_to_u`` / ``dist_to_v`` hold hop distances inside the subgraph
    (target link removed), UNREACHABLE (-1) where no path exists.
    """

    global_ids: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    dist_to_u: np.ndarray
    dist_to_v: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.global_ids.shape[0]

    @property
    def num_edges(self) -> int:
        return self.indices.shape[0] // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(self.indices.shape[0], dtype=dtype)
        return sp.csr_matrix(
            (data, self.indices.astype(np.int64), self.indptr),
            shape=(self.num_nodes, self.num_nodes),
        )


def _bfs_from(indptr: np.ndarray, indices: np.ndarray, n: int, src: int,
              max_depth: int | None = None,
              skip_edge: tuple[int, int] | None = None,
              blocked: int | None = None) -> np.ndarray:
    """Hop distances from ``src``; -1 where unreachable or beyond max_depth.

    ``skip_edge`` suppresses one undirected edge, ``blocked`` removes a node
    entirely (used for masked distance computations).
    """
    dist = np.full(n, UNREACHABLE, dtype=np.int32)
    if blocked is not None and blocked == src:
        return dist
    dist[src] = 0
    frontier = [src]
    depth = 0
    while frontier and (max_depth is None or depth < max_depth):
        depth += 1
        nxt = []
        for x in frontier:
            nbrs = indices[indptr[x]:indptr[x + 1]]
            for y in nbrs:
                y = int(y)
                if skip_edge is not None and (
                        (x == skip_edge[0] and y == skip_edge[1])
                        or (x == skip_edge[1] and y == skip_edge[0])):
                    continue
                if y == blocked or dist[y] >= 0:
                    continue
                dist[y] = depth
                nxt.append(y)
        frontier = nxt
    return dist


def _induced(graph: Graph, ids: np.ndarray) -> Subgraph:
    """Induced subgraph on ``ids`` (endpoints first) minus the (0, 1) edge."""
    n_sub = ids.shape[0]
    order = np.argsort(ids)
    sorted_ids = ids[order]
    src_parts = []
    dst_parts = []
    for i in range(n_sub):
        nb = graph.neighbors(int(ids[i]))
        if nb.shape[0]:
            pos = np.minimum(np.searchsorted(sorted_ids, nb), n_sub - 1)
            loc = order[pos[sorted_ids[pos] == nb]]
        else:
            loc = np.zeros(0, dtype=np.int64)
        if i == 0:
            loc = loc[loc != 1]
        elif i == 1:
            loc = loc[loc != 0]
        src_parts.append(np.full(loc.shape[0], i, dtype=np.int64))
        dst_parts.append(np.sort(loc))
    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    indptr = np.zeros(n_sub + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_sub), out=indptr[1:])
    indices = dst.astype(np.int32)
    d_u = _bfs_from(indptr, indices, n_sub, 0)
    d_v = _bfs_from(indptr, indices, n_sub, 1)
    return Subgraph(ids.astype(np.int64), indptr, indices, d_u, d_v)


def _order_ids(u: int, v: int, reached: set) -> np.ndarray:
    rest = sorted(reached - {u, v})
    return np.asarray([u, v] + rest, dtype=np.int64)


def extract_h_hop(graph: Graph, u: int, v: int, h: int) -> Subgraph:
    """Enclosing subgraph: nodes within h hops of u or v, (u, v) edge removed.

    The hop limit is evaluated on the graph without the target edge, so a
    neighbor reachable only through (u, v) is not pulled in by that edge.
    """
    _check_link(graph, u, v)
    if h < 1:
        raise ValueError("h must be >= 1")
    du = _bfs_from(graph.indptr, graph.indices, graph.num_nodes, u,
                   max_depth=h, skip_edge=(u, v))
    dv = _bfs_from(graph.indptr, graph.indices, graph.num_nodes, v,
                   max_depth=h, skip_edge=(u, v))
    reached = set(np.flatnonzero((du >= 0) | (dv >= 0)).tolist())
    reached.update((u, v))
    return _induced(graph, _order_ids(u, v, reached))


def random_walk_subgraph(graph: Graph, u: int, v: int, k: int, l: int,
                         seed: int) -> Subgraph:
    """Union of k uniform random walks of length l from each endpoint.

    The (u, v) edge is removed before walking, so a walk at u never steps
    directly to v and vice versa. Walks from a dead end terminate in place.
    Node count is bounded by 2*k*l + 2.
    """
    _check_link(graph, u, v)
    if k < 1 or l < 1:
        raise ValueError("k and l must be >= 1")
    rng = np.random.default_rng(seed)
    visited = {u, v}
    for root in (u, v):
        for _ in range(k):
            x = root
            for _ in range(l):
                nbrs = graph.neighbors(x)
                if x == u:
                    nbrs = nbrs[nbrs != v]
                elif x == v:
                    nbrs = nbrs[nbrs != u]
                if nbrs.shape[0] == 0:
                    break
                x = int(nbrs[rng.integers(nbrs.shape[0])])
                visited.add(x)
    return _induced(graph, _order_ids(u, v, visited))


def graph_power(graph: Graph, i: int) -> Graph:
    """Graph with an edge wherever the geodesic distance in ``graph`` is in [1, i].

    Power 1 returns an identical copy. Features carry over unchanged.
    """
    if i < 1:
        raise ValueError("power must be >= 1")
    if i == 1:
        return Graph(graph.num_nodes, graph.indptr.copy(),
                     graph.indices.copy(), graph.features)
    n = graph.num_nodes
    rows = []
    cols = []
    for src in range(n):
        dist = _bfs_from(graph.indptr, graph.indices, n, src, max_depth=i)
        near = np.flatnonzero(dist >= 1)
        rows.append(np.full(near.shape[0], src, dtype=np.int64))
        cols.append(near.astype(np.int64))
    src = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    keep = src < dst
    edges = np.stack([src[keep], dst[keep]], axis=1)
    return build_graph(n, edges, features=graph.features)


def sop_subgraph(graph: Graph, u: int, v: int, i: int, h: int,
                 power_graph: Graph | None = None) -> Subgraph:
    """h-hop enclosing subgraph of the i-th graph power around (u, v).

    Power 0 means the base graph itself. ``power_graph`` may supply a
    precomputed ``graph_power(graph, i)`` to avoid recomputation.
    """
    if i < 0:
        raise ValueError("power index must be >= 0")
    if i <= 1:
        g = graph
    elif power_graph is not None:
        g = power_graph
    else:
        g = graph_power(graph, i)
    return extract_h_hop(g, u, v, h)


def _check_link(graph: Graph, u: int, v: int) -> None:
    n = graph.num_nodes
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"node id out of range: ({u}, {v})")
    if u == v:
        raise ValueError("target link endpoints must differ")
