"""Download the benchmark graphs into the data directory.

Needs network access. Writes <data_dir>/<name>/edges.txt (and features.txt
for cora); the data directory is ./data or $DIFFLINK_DATA. The four
non-attributed graphs ship as MATLAB adjacency files in the SEAL
repository; cora comes from the LINQS archive as a citation list plus
bag-of-words rows keyed by paper id.

Usage: python scripts/fetch_datasets.py [name ...]   (default: all)
"""
import io
import json
import sys
import tarfile
import urllib.request
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from difflink.datasets import DATASET_STATS, data_dir
from difflink.graphs import build_graph, save_edge_list

SEAL_BASE = ("https://raw.githubusercontent.com/muhanzhang/SEAL/master/"
             "MATLAB/data")
MAT_SOURCES = {
    "ns": f"{SEAL_BASE}/NS.mat",
    "power": f"{SEAL_BASE}/Power.mat",
    "yeast": f"{SEAL_BASE}/Yeast.mat",
    "pb": f"{SEAL_BASE}/PB.mat",
}
CORA_URL = "https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz"


def _get(url: str) -> bytes:
    req = urllib.request.Request(url, headers={"User-Agent": "difflink/0.1"})
    print(f"  GET {url}")
    with urllib.request.urlopen(req, timeout=120) as resp:
        return resp.read()


def _check(name: str, n: int, m: int) -> None:
    want_n, want_m, _ = DATASET_STATS[name]
    note = "" if (n, m) == (want_n, want_m) else \
        f"  (expected {want_n}/{want_m}; splits will differ from reports)"
    print(f"  {name}: {n} nodes, {m} edges{note}")


def fetch_mat(name: str, out: Path) -> None:
    from scipy.io import loadmat
    mat = loadmat(io.BytesIO(_get(MAT_SOURCES[name])))
    net = mat["net"].tocoo()
    mask = net.row < net.col
    edges = np.stack([net.row[mask], net.col[mask]], axis=1).astype(np.int64)
    graph = build_graph(net.shape[0], edges)
    save_edge_list(graph, out / "edges.txt")
    _check(name, graph.num_nodes, graph.edge_array().shape[0])


def fetch_cora(out: Path) -> None:
    blob = _get(CORA_URL)
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        content = tar.extractfile("cora/cora.content").read().decode()
        cites = tar.extractfile("cora/cora.cites").read().decode()
    ids, rows = [], []
    for line in content.strip().splitlines():
        parts = line.split("\t")
        ids.append(parts[0])
        rows.append([float(x) for x in parts[1:-1]])  # last column is a class
    order = np.argsort(np.asarray(ids))
    index = {ids[int(i)]: new for new, i in enumerate(order)}
    feats = np.asarray(rows, dtype=np.float32)[order]
    edges = []
    for line in cites.strip().splitlines():
        a, b = line.split()
        if a in index and b in index and a != b:
            edges.append((index[a], index[b]))
    graph = build_graph(len(ids), np.asarray(edges, dtype=np.int64))
    save_edge_list(graph, out / "edges.txt")
    np.savetxt(out / "features.txt", feats, fmt="%g")
    (out / "id_map.json").write_text(json.dumps(index, indent=0))
    _check("cora", graph.num_nodes, graph.edge_array().shape[0])


def main(argv) -> int:
    names = argv or sorted(DATASET_STATS)
    root = data_dir()
    print(f"data directory: {root.resolve()}")
    failed = []
    for name in names:
        if name not in DATASET_STATS:
            print(f"unknown dataset {name!r}; choices: {sorted(DATASET_STATS)}")
            return 2
        out = root / name
        out.mkdir(parents=True, exist_ok=True)
        try:
            if name == "cora":
                fetch_cora(out)
            else:
                fetch_mat(name, out)
        except Exception as exc:     # keep going; report at the end
            print(f"  {name}: FAILED ({exc})")
            failed.append(name)
    if failed:
        print(f"\nfailed: {failed} (check network access and retry)")
        return 1
    print("\nall datasets ready")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
