"""Config-driven experiment runner: split, precompute, train, evaluate, report.

Configs are JSON with sections {dataset, split, variant, sampling, training,
eval, runs}; defaults reproduce the benchmark setup (r=3, h=3 attributed /
h=2 non-attributed, 256 hidden units, dropout 0.5, 50 epochs, batch 32,
seeds 0..9), so a minimal config is just a dataset and a variant. Reports
keep every wall-clock measurement under the "timings" subtree; everything
else is a pure function of the config and seeds.
"""
from __future__ import annotations

import csv
import io
import json
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import resolve_dataset
from .graphs import EdgeSplit, Graph, split_edges
from .metrics import Heuristic, ScoredPairs, auc, hits_at_k, mrr, score_pairs
from .model import TrainConfig, predict, train
from .records import (SamplingOperatorSet, Variant, precompute_dataset,
                      read_records, storage_comparison)


class ConfigError(ValueError):
    """Config validation failure; message names the offending field."""


_DEFAULT_SEEDS = list(range(10))
_SECTIONS = ("dataset", "split", "variant", "sampling", "training", "eval",
             "runs", "mode", "heuristics", "workers", "storage")


def _section(cfg: dict, name: str, default):
    val = cfg.get(name, default)
    if default is not None and not isinstance(val, type(default)):
        raise ConfigError(f"{name}: expected {type(default).__name__}")
    return val


def _pick(section: dict, path: str, key: str, default, kind):
    val = section.get(key, default)
    if val is None:
        return None
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {val!r}")
    return val


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated, fully-defaulted experiment description."""

    dataset: dict
    ratios: tuple
    variant: str
    sampling: dict
    training: dict
    eval_opts: dict
    seeds: tuple
    mode: str
    heuristics: tuple
    workers: int
    storage: bool


def parse_config(cfg: dict) -> ExperimentSpec:
    """Validate a config dict, filling defaults. Raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(cfg) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    dataset = _section(cfg, "dataset", {})
    if not isinstance(dataset, dict) or not dataset.get("name"):
        raise ConfigError("dataset.name: required")

    split = _section(cfg, "split", {})
    ratios = split.get("ratios", [0.85, 0.05, 0.10])
    if (not isinstance(ratios, (list, tuple)) or len(ratios) != 3
            or not all(isinstance(r, (int, float)) and r > 0 for r in ratios)):
        raise ConfigError("split.ratios: expected three positive fractions")

    variant = cfg.get("variant", "PoS")
    try:
        Variant(variant)
    except ValueError:
        raise ConfigError(
            f"variant: {variant!r} is not one of "
            f"{[v.value for v in Variant]}") from None

    s = _section(cfg, "sampling", {})
    sampling = {
        "r": _pick(s, "sampling", "r", 3, int),
        "h": _pick(s, "sampling", "h", None, int),
        "k": _pick(s, "sampling", "k", None, int),
        "l": _pick(s, "sampling", "l", None, int),
        "labeling": _pick(s, "sampling", "labeling", "zero_one", str),
        "label_cap": _pick(s, "sampling", "label_cap", 100, int),
        "normalized": _pick(s, "sampling", "normalized", False, bool),
        "ccn_cap": _pick(s, "sampling", "ccn_cap", 128, int),
    }

    t = _section(cfg, "training", {})
    training = {
        "d_prime": _pick(t, "training", "d_prime", 256, int),
        "dropout": _pick(t, "training", "dropout", 0.5, float),
        "epochs": _pick(t, "training", "epochs", 50, int),
        "batch_size": _pick(t, "training", "batch_size", 32, int),
        "lr": _pick(t, "training", "lr", 1e-3, float),
        "agg": _pick(t, "training", "agg", "mean", str),
    }

    e = _section(cfg, "eval", {})
    hits_k = e.get("hits_k", [])
    if not isinstance(hits_k, list) or not all(
            isinstance(k, int) and k >= 1 for k in hits_k):
        raise ConfigError("eval.hits_k: expected a list of positive integers")
    eval_opts = {"hits_k": hits_k, "mrr": _pick(e, "eval", "mrr", False, bool)}

    runs = _section(cfg, "runs", {})
    seeds = runs.get("seeds", _DEFAULT_SEEDS)
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(x, int) for x in seeds):
        raise ConfigError("runs.seeds: expected a nonempty list of integers")

    mode = cfg.get("mode", "full")
    if mode not in ("full", "heuristics"):
        raise ConfigError(f"mode: {mode!r} is not 'full' or 'heuristics'")

    heuristics = cfg.get("heuristics", ["CN", "AA", "PPR"])
    try:
        heuristics = [Heuristic(hx).value for hx in heuristics]
    except ValueError:
        raise ConfigError(f"heuristics: entries must be in "
                          f"{[hx.value for hx in Heuristic]}") from None

    workers = cfg.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers: expected a positive integer")
    storage = cfg.get("storage", True)
    if not isinstance(storage, bool):
        raise ConfigError("storage: expected true or false")

    return ExperimentSpec(dataset=dataset, ratios=tuple(float(r) for r in ratios),
                          variant=variant, sampling=sampling, training=training,
                          eval_opts=eval_opts, seeds=tuple(seeds), mode=mode,
                          heuristics=tuple(heuristics), workers=workers,
                          storage=storage)


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(cfg)


def operator_config(spec: ExperimentSpec, graph: Graph) -> SamplingOperatorSet:
    """Resolve the sampling section against the graph (default h by class)."""
    s = dict(spec.sampling)
    if s["h"] is None:
        s["h"] = 3 if graph.features is not None else 2
    return SamplingOperatorSet(variant=spec.variant, r=s["r"], h=s["h"],
                               k=s["k"], l=s["l"], labeling=s["labeling"],
                               label_cap=s["label_cap"],
                               normalized=s["normalized"], ccn_cap=s["ccn_cap"])


def labeled_links(split: EdgeSplit, part: str) -> np.ndarray:
    """(u, v, label) rows for one split part: positives first, then negatives."""
    pos = split.positives(part)
    neg = split.negatives(part)
    out = np.zeros((pos.shape[0] + neg.shape[0], 3), dtype=np.int64)
    out[:pos.shape[0], :2] = pos
    out[:pos.shape[0], 2] = 1
    out[pos.shape[0]:, :2] = neg
    return out


def precompute_split(split: EdgeSplit, config: SamplingOperatorSet,
                     out_dir, workers: int = 1, seed: int = 0) -> dict:
    """Write train/valid/test record files for a split; returns stats per part.

    Records are always built on the observed (training-only) graph so no
    evaluation edge leaks into the diffusion.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = {}
    for part in ("train", "valid", "test"):
        links = labeled_links(split, part)
        stats[part] = precompute_dataset(split.observed_graph, links, config,
                                         out_dir / f"{part}.rec",
                                         worker_count=workers, seed=seed)
    return stats


def _scored(scores: np.ndarray, labels: np.ndarray) -> ScoredPairs:
    return ScoredPairs(scores[labels == 1], scores[labels == 0])


def _eval_scores(scores: np.ndarray, labels: np.ndarray, eval_opts: dict) -> dict:
    sc = _scored(scores, labels)
    out = {"test_auc": auc(sc)}
    for k in eval_opts["hits_k"]:
        out[f"hits@{k}"] = hits_at_k(sc, k)
    if eval_opts["mrr"]:
        negs = sc.neg_scores
        out["mrr"] = mrr([(p, negs) for p in sc.pos_scores])
    return out


def _heuristic_run(split: EdgeSplit, spec: ExperimentSpec) -> dict:
    labels = np.concatenate([np.ones(split.test_pos.shape[0], dtype=np.int64),
                             np.zeros(split.test_neg.shape[0], dtype=np.int64)])
    pairs = np.concatenate([split.test_pos, split.test_neg])
    out = {}
    for name in spec.heuristics:
        scores = score_pairs(split.observed_graph, pairs, Heuristic(name))
        out[name] = _eval_scores(scores, labels, spec.eval_opts)
    return out


def _aggregate(runs: list, keys) -> dict:
    out = {}
    for key in keys:
        vals = np.asarray([r[key] for r in runs], dtype=np.float64)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


@dataclass
class ExperimentReport:
    """Everything one experiment produced; JSON/table/CSV renderable."""

    config: dict
    runs: list
    aggregate: dict
    timings: dict
    storage: dict | None

    def to_dict(self) -> dict:
        return {"config": self.config, "runs": self.runs,
                "aggregate": self.aggregate, "timings": self.timings,
                "storage": self.storage}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def _rows(self):
        if not self.runs:
            return [], []
        if "heuristics" in self.runs[0]:
            names = sorted(self.runs[0]["heuristics"])
            header = ["seed"] + [f"{n}_auc" for n in names]
            rows = [[r["seed"]] + [r["heuristics"][n]["test_auc"] for n in names]
                    for r in self.runs]
            return header, rows
        keys = [k for k in self.runs[0] if k not in ("seed", "best_epoch")]
        header = ["seed"] + keys + ["best_epoch"]
        rows = [[r["seed"]] + [r[k] for k in keys] + [r["best_epoch"]]
                for r in self.runs]
        return header, rows

    def text_table(self) -> str:
        header, rows = self._rows()
        if not rows:
            return "(no runs)\n"
        display = [header] + [
            [f"{x:.4f}" if isinstance(x, float) else str(x) for x in row]
            for row in rows]
        if "heuristics" in self.runs[0]:
            mean_row = ["mean"]
            for j in range(1, len(header)):
                vals = [row[j] for row in rows]
                mean_row.append(f"{np.mean(vals):.4f}+/-{np.std(vals):.4f}")
        else:
            mean_row = ["mean"]
            for name in header[1:]:
                if name in self.aggregate:
                    agg = self.aggregate[name]
                    mean_row.append(f"{agg['mean']:.4f}+/-{agg['std']:.4f}")
                else:
                    mean_row.append("")
        display.append(mean_row)
        widths = [max(len(row[j]) for row in display) for j in range(len(header))]
        lines = []
        for i, row in enumerate(display):
            lines.append("  ".join(cell.ljust(widths[j])
                                   for j, cell in enumerate(row)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * widths[j]
                                       for j in range(len(header))))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header, rows = self._rows()
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()

    def save(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(self.to_json())
        (out_dir / "report.txt").write_text(self.text_table())
        (out_dir / "report.csv").write_text(self.to_csv())


def _config_echo(spec: ExperimentSpec, config: SamplingOperatorSet) -> dict:
    return {
        "dataset": spec.dataset,
        "split": {"ratios": list(spec.ratios)},
        "sampling": config.echo(),
        "training": spec.training,
        "eval": spec.eval_opts,
        "runs": {"seeds": list(spec.seeds)},
        "mode": spec.mode,
        "heuristics": list(spec.heuristics),
        "workers": spec.workers,
        "storage": spec.storage,
    }


def run_experiment(config_path, out_dir=None, workers: int | None = None,
                   mode: str | None = None) -> ExperimentReport:
    """Run the full per-seed pipeline described by a config file.

    Every seed gets its own split, record files (in a scratch directory),
    trained head, and test-set metrics. ``workers`` and ``mode`` override
    the config. Reports are also written to ``out_dir`` when given.
    """
    spec = (load_config(config_path) if isinstance(config_path, (str, Path))
            else parse_config(config_path))
    if workers is not None:
        spec = ExperimentSpec(**{**spec.__dict__, "workers": workers})
    if mode is not None:
        spec = ExperimentSpec(**{**spec.__dict__, "mode": mode})
    graph = resolve_dataset(spec.dataset)
    config = operator_config(spec, graph)
    train_cfg_base = dict(spec.training)

    runs = []
    timings = {"preprocess_s": [], "train_s_per_epoch": [], "inference_s": []}
    storage = None
    for seed in spec.seeds:
        split = split_edges(graph, spec.ratios, seed)
        if spec.storage and storage is None:
            storage = {}
            for part in ("train", "valid", "test"):
                rep = storage_comparison(split.observed_graph,
                                         labeled_links(split, part), config)
                storage[part] = {"record_bytes": rep.record_bytes,
                                 "seal_bytes": rep.seal_bytes,
                                 "reduction_pct": rep.reduction_pct,
                                 "num_links": rep.num_links}
        if spec.mode == "heuristics":
            runs.append({"seed": seed,
                         "heuristics": _heuristic_run(split, spec)})
            continue
        with tempfile.TemporaryDirectory(prefix="difflink-run-") as tmp:
            t0 = time.monotonic()
            precompute_split(split, config, tmp, workers=spec.workers,
                             seed=seed)
            timings["preprocess_s"].append(time.monotonic() - t0)
            tc = TrainConfig(seed=seed, pooling=config.pooling, **train_cfg_base)
            epoch_times: list = []
            params, history = train(Path(tmp) / "train.rec",
                                    Path(tmp) / "valid.rec", tc,
                                    epoch_times=epoch_times)
            test_records = read_records(Path(tmp) / "test.rec")
            t0 = time.monotonic()
            scores = predict(test_records, params, agg=tc.agg)
            timings["inference_s"].append(time.monotonic() - t0)
            steady = epoch_times[1:] if len(epoch_times) > 1 else epoch_times
            timings["train_s_per_epoch"].append(float(np.mean(steady)))
            labels = np.asarray([rec.label for rec in test_records])
            entry = {"seed": seed, **_eval_scores(scores, labels, spec.eval_opts)}
            entry["best_epoch"] = int(max(
                range(len(history)),
                key=lambda i: (history[i]["valid_auc"], -i)) + 1)
            runs.append(entry)

    if spec.mode == "heuristics":
        names = list(spec.heuristics)
        aggregate = {
            name: {
                "test_auc": {
                    "mean": float(np.mean([r["heuristics"][name]["test_auc"]
                                           for r in runs])),
                    "std": float(np.std([r["heuristics"][name]["test_auc"]
                                         for r in runs])),
                }
            } for name in names}
    else:
        keys = [k for k in runs[0] if k not in ("seed", "best_epoch")]
        aggregate = _aggregate(runs, keys)

    timing_summary = {key: {"mean": float(np.mean(vals)),
                            "per_run": [float(x) for x in vals]}
                      for key, vals in timings.items() if vals}
    report = ExperimentReport(config=_config_echo(spec, config), runs=runs,
                              aggregate=aggregate, timings=timing_summary,
                              storage=storage)
    if out_dir is not None:
        report.save(out_dir)
    return report


def _per_record_inference_s(records, params, agg: str, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.monotonic()
        predict(records, params, agg=agg)
        best = min(best, time.monotonic() - t0)
    return best / len(records)


def timing_probe(config_path, max_links: int = 512) -> dict:
    """Timing summary plus the subgraph-size-independence probe.

    Runs one seed's pipeline for wall-clock numbers, then rebuilds the same
    links at h=1 and h=3 and times eval-mode inference per record on both.
    Records have identical sizes by construction, so the two per-record
    times should agree; the ratio and a 20% flag are reported.
    """
    spec = (load_config(config_path) if isinstance(config_path, (str, Path))
            else parse_config(config_path))
    graph = resolve_dataset(spec.dataset)
    config = operator_config(spec, graph)
    seed = spec.seeds[0]
    split = split_edges(graph, spec.ratios, seed)
    links = labeled_links(split, "test")[:max_links]

    report: dict = {"seed": seed, "num_probe_links": int(links.shape[0])}
    with tempfile.TemporaryDirectory(prefix="difflink-probe-") as tmp:
        t0 = time.monotonic()
        precompute_split(split, config, tmp, workers=spec.workers, seed=seed)
        report["preprocess_s"] = time.monotonic() - t0
        tc = TrainConfig(seed=seed, pooling=config.pooling, **spec.training)
        epoch_times: list = []
        params, _ = train(Path(tmp) / "train.rec", Path(tmp) / "valid.rec", tc,
                          epoch_times=epoch_times)
        steady = epoch_times[1:] if len(epoch_times) > 1 else epoch_times
        report["train_s_per_epoch"] = float(np.mean(steady))
        test_records = read_records(Path(tmp) / "test.rec")
        t0 = time.monotonic()
        predict(test_records, params, agg=tc.agg)
        report["inference_s"] = time.monotonic() - t0

        probe = {}
        for h in (1, 3):
            h_config = SamplingOperatorSet(
                variant=config.variant, r=config.r, h=h, k=config.k,
                l=config.l, labeling=config.labeling,
                label_cap=config.label_cap, normalized=config.normalized,
                ccn_cap=config.ccn_cap)
            path = Path(tmp) / f"probe_h{h}.rec"
            t0 = time.monotonic()
            precompute_dataset(split.observed_graph, links, h_config, path,
                               worker_count=spec.workers, seed=seed)
            probe[f"preprocess_s_h{h}"] = time.monotonic() - t0
            recs = read_records(path)
            probe[f"per_record_inference_s_h{h}"] = _per_record_inference_s(
                recs, params, tc.agg)
        ratio = (probe["per_record_inference_s_h3"]
                 / probe["per_record_inference_s_h1"])
        probe["inference_ratio_h3_vs_h1"] = ratio
        probe["within_20pct"] = bool(0.8 <= ratio <= 1.25)
        report["independence_probe"] = probe
    return report
