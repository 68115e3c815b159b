"""Ledger parsing, neighbourhood sampling, node features and graph datasets."""

from .dataset import (
    Dataset,
    DatasetManifest,
    ManifestEntry,
    build_task_dataset,
    load_dataset,
    persist_dataset,
)
from .features import FEATURE_NAMES, N_FEATURES, AccountFeatureVector, extract_node_features
from .graphs import (
    DynamicGraphSequence,
    GraphInstance,
    StaticSubgraph,
    build_dynamic_sequence,
    build_instance,
    build_static_subgraph,
    evolution_time,
    slice_of,
)
from .records import (
    TransactionRecord,
    parse_labels,
    parse_transactions,
    parse_transactions_report,
    write_labels,
    write_transactions,
)
from .sampling import LedgerIndex, sample_khop, top_k_neighbors

__all__ = [
    "AccountFeatureVector", "Dataset", "DatasetManifest", "DynamicGraphSequence", "FEATURE_NAMES",
    "GraphInstance", "LedgerIndex", "ManifestEntry", "N_FEATURES", "StaticSubgraph", "TransactionRecord",
    "build_dynamic_sequence", "build_instance", "build_static_subgraph", "build_task_dataset",
    "evolution_time", "extract_node_features", "load_dataset", "parse_labels", "parse_transactions",
    "parse_transactions_report", "persist_dataset", "sample_khop", "slice_of", "top_k_neighbors", "write_labels",
    "write_transactions",
]
