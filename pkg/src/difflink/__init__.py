"""Scalable link prediction from precomputed subgraph-diffusion features.

The pipeline: split a graph's edges, sample an enclosing subgraph per
candidate link, diffuse labeled node features over it, store only the rows
of the pooled nodes in fixed-size binary records, and train a shallow
pooled head on those records. Heuristic baselines, ranking metrics, and a
config-driven benchmark harness round out the package.
"""

from .graphs import (EdgeSplit, Graph, GraphFormatError, build_graph,
                     common_neighbors, load_edge_list, load_features,
                     load_split, normalized_adjacency, sample_negatives,
                     save_edge_list, save_split, split_edges)
from .sampling import (Subgraph, UNREACHABLE, extract_h_hop, graph_power,
                       random_walk_subgraph, sop_subgraph)
from .labeling import (LabelScheme, LabeledFeatures, augment_features,
                       drnl_labels, label_dim_for, zero_one_labels)
from .records import (CCN_CAP, DatasetStats, LinkRecord, Pooling, RecordFile,
                      RecordFormatError, SamplingOperatorSet, StorageReport,
                      Variant, build_link_record, pooled_rows_of_power,
                      precompute_dataset, read_records, serialize_record,
                      storage_comparison, write_records)
from .model import (Adam, ModelParams, TrainConfig, forward, init_params,
                    load_params, loss_and_gradients, predict, save_params,
                    stack_records, train)
from .metrics import (Heuristic, PPRScorer, ScoredPairs, auc, heuristic_score,
                      hits_at_k, mrr, ppr_vector, score_pairs)
from .bench import (ConfigError, ExperimentReport, ExperimentSpec,
                    labeled_links, load_config, operator_config, parse_config,
                    precompute_split, run_experiment, timing_probe)
from . import datasets

__version__ = "0.1.0"

__all__ = [
    "Adam", "CCN_CAP", "ConfigError", "DatasetStats", "EdgeSplit",
    "ExperimentReport", "ExperimentSpec", "Graph", "GraphFormatError",
    "Heuristic", "LabelScheme", "LabeledFeatures", "LinkRecord",
    "ModelParams", "PPRScorer", "Pooling", "RecordFile", "RecordFormatError",
    "SamplingOperatorSet", "ScoredPairs", "StorageReport", "Subgraph",
    "TrainConfig", "UNREACHABLE", "Variant", "auc", "augment_features",
    "build_graph", "build_link_record", "common_neighbors", "datasets",
    "drnl_labels", "extract_h_hop", "forward", "graph_power",
    "heuristic_score", "hits_at_k", "init_params", "label_dim_for",
    "labeled_links", "load_config", "load_edge_list", "load_features",
    "load_params", "load_split", "loss_and_gradients", "mrr",
    "normalized_adjacency", "operator_config", "parse_config",
    "pooled_rows_of_power", "ppr_vector", "precompute_dataset",
    "precompute_split", "predict", "random_walk_subgraph", "read_records",
    "run_experiment", "sample_negatives", "save_edge_list", "save_params",
    "save_split", "score_pairs", "serialize_record", "sop_subgraph",
    "split_edges", "stack_records", "storage_comparison", "timing_probe",
    "train", "write_records", "zero_one_labels",
]
