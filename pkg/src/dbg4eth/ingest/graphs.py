"""Static (merged) and dynamic (time-sliced) subgraph construction."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from math import floor
from typing import Sequence

import numpy as np

from ..errors import EmptyInputError, ValidationError
from .features import AccountFeatureVector, extract_node_features
from .records import WEI_PER_ETH, TransactionRecord
from .sampling import LedgerIndex, sample_khop


@dataclass
class StaticSubgraph:
    center: str
    nodes: list[str]
    features: list[AccountFeatureVector]
    edges: list[tuple[int, int, float, int]]  # (i, j, total ETH, tx count)
    label: int
    label_name: str = ""

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def feature_matrix(self) -> np.ndarray:
        return np.array([f.as_tuple() for f in self.features], dtype=float).reshape(-1, 15)


@dataclass
class DynamicGraphSequence:
    center: str
    nodes: list[str]
    features: list[AccountFeatureVector]
    slices: list[list[tuple[int, int, float]]]  # per slice: (i, j, total ETH)
    label: int
    label_name: str = ""

    @property
    def T(self) -> int:
        return len(self.slices)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def feature_matrix(self) -> np.ndarray:
        return np.array([f.as_tuple() for f in self.features], dtype=float).reshape(-1, 15)


@dataclass
class GraphInstance:
    """Both views of one account-centred subgraph."""

    center: str
    label: int
    label_name: str
    static: StaticSubgraph
    dynamic: DynamicGraphSequence
    meta: dict = field(default_factory=dict)


def evolution_time(timestamps: Sequence[int | float]) -> list[float]:
    """Min-max normalise timestamps to [0, 1]; all zeros when they coincide."""
    if len(timestamps) == 0:
        raise EmptyInputError("evolution_time needs at least one timestamp")
    lo, hi = min(timestamps), max(timestamps)
    if hi == lo:
        return [0.0] * len(timestamps)
    span = hi - lo
    return [(t - lo) / span for t in timestamps]


def slice_of(te: float, T: int) -> int:
    """Slice index ``floor(te * T)`` with 1.0 folded into the last slice."""
    return min(max(floor(te * T), 0), T - 1)


def _slice_indices(timestamps: Sequence[int], T: int) -> list[int]:
    # integer form of floor(T * (t - lo) / (hi - lo)); exact for integral timestamps
    lo, hi = min(timestamps), max(timestamps)
    if hi == lo:
        return [0] * len(timestamps)
    span = hi - lo
    return [min((t - lo) * T // span, T - 1) for t in timestamps]


def _node_features(nodes, txs):
    touching: dict[str, list[TransactionRecord]] = defaultdict(list)
    for r in txs:
        touching[r.sender].append(r)
        if r.receiver != r.sender:
            touching[r.receiver].append(r)
    return [extract_node_features(a, touching.get(a, ())) for a in nodes]


def build_static_subgraph(center, nodes, txs, label, label_name="", features=None) -> StaticSubgraph:
    pos = {a: i for i, a in enumerate(nodes)}
    if center not in pos:
        raise ValidationError("center must be in the node set")
    if features is None:
        features = _node_features(nodes, txs)
    merged: dict[tuple[int, int], list[int]] = {}
    for r in txs:
        key = (pos[r.sender], pos[r.receiver])
        acc = merged.setdefault(key, [0, 0])
        acc[0] += r.value
        acc[1] += 1
    edges = [(i, j, w / WEI_PER_ETH, t) for (i, j), (w, t) in sorted(merged.items())]
    return StaticSubgraph(center, list(nodes), list(features), edges, int(label), label_name)


def build_dynamic_sequence(center, nodes, txs, T, label, label_name="", features=None) -> DynamicGraphSequence:
    if T < 1:
        raise ValidationError("T must be >= 1")
    pos = {a: i for i, a in enumerate(nodes)}
    if features is None:
        features = _node_features(nodes, txs)
    buckets: list[dict[tuple[int, int], int]] = [dict() for _ in range(T)]
    if txs:
        for r, k in zip(txs, _slice_indices([r.timestamp for r in txs], T)):
            key = (pos[r.sender], pos[r.receiver])
            buckets[k][key] = buckets[k].get(key, 0) + r.value
    slices = [[(i, j, w / WEI_PER_ETH) for (i, j), w in sorted(b.items())] for b in buckets]
    return DynamicGraphSequence(center, list(nodes), list(features), slices, int(label), label_name)


def build_instance(center: str, index: LedgerIndex, K: int, h: int, T: int, label: int, label_name: str = "") -> GraphInstance:
    sub = sample_khop(center, index, K, h)
    feats = _node_features(sub.nodes, sub.transactions)
    st = build_static_subgraph(center, sub.nodes, sub.transactions, label, label_name, feats)
    dy = build_dynamic_sequence(center, sub.nodes, sub.transactions, T, label, label_name, feats)
    return GraphInstance(center, int(label), label_name, st, dy)
