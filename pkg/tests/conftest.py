import numpy as np
import pytest

from difflink import build_graph
from difflink.datasets import find_dataset


def gnp_graph(rng, n_lo=4, n_hi=12, p=0.35, features=None):
    """Small Erdos-Renyi graph for randomized trials; guaranteed >= 1 edge."""
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        mask = rng.random((n, n)) < p
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
        if edges:
            feats = None
            if features:
                feats = rng.random((n, features)).astype(np.float32)
            return build_graph(n, np.asarray(edges, dtype=np.int64), feats)


def random_pair(rng, n):
    u = int(rng.integers(n))
    v = int(rng.integers(n))
    while v == u:
        v = int(rng.integers(n))
    return u, v


def require_dataset(name: str) -> dict:
    """Locate a real dataset or skip with fetch instructions."""
    found = find_dataset(name)
    if found is None:
        pytest.skip(
            f"real dataset {name!r} not present (looked under the data "
            f"directory; set DIFFLINK_DATA or run scripts/fetch_datasets.py "
            f"on a machine with network access)")
    return found
