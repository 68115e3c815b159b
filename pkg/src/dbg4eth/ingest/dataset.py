"""Dataset assembly (positives, negatives, splits) and JSON-lines persistence."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import SchemaError, ValidationError
from .features import AccountFeatureVector
from .graphs import DynamicGraphSequence, GraphInstance, StaticSubgraph, build_instance
from .sampling import LedgerIndex

HEADER = "dbg4eth-dataset v1"
SPLITS = ("train", "validation", "test")
GRAPHS_FILE = "graphs.jsonl"
MANIFEST_FILE = "manifest.jsonl"


@dataclass
class ManifestEntry:
    path: str
    label: int
    center: str
    split: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    params: dict = field(default_factory=dict)  # K, h, T, ...

    def validate(self) -> None:
        where: dict[str, str] = {}
        for e in self.entries:
            if e.split not in SPLITS:
                raise ValidationError(f"unknown split {e.split!r} for {e.center}")
            prev = where.setdefault(e.center, e.split)
            if prev != e.split:
                raise ValidationError(f"center {e.center} appears in both {prev} and {e.split}")

    def fractions(self) -> dict[str, float]:
        n = len(self.entries)
        return {s: (sum(e.split == s for e in self.entries) / n if n else 0.0) for s in SPLITS}

    def split_of(self) -> dict[str, str]:
        return {e.center: e.split for e in self.entries}


@dataclass
class Dataset:
    instances: list[GraphInstance] = field(default_factory=list)
    manifest: DatasetManifest = field(default_factory=DatasetManifest)

    def split(self, name: str) -> list[GraphInstance]:
        where = self.manifest.split_of()
        return [g for g in self.instances if where.get(g.center) == name]


# -- serialisation ---------------------------------------------------------

def _static_to_dict(g: StaticSubgraph) -> dict:
    return {
        "center": g.center, "nodes": g.nodes,
        "features": [f.as_tuple() for f in g.features],
        "edges": [list(e) for e in g.edges], "label": g.label, "label_name": g.label_name,
    }


def _static_from_dict(d: dict) -> StaticSubgraph:
    return StaticSubgraph(
        d["center"], list(d["nodes"]),
        [AccountFeatureVector.from_sequence(f) for f in d["features"]],
        [(int(i), int(j), float(w), int(t)) for i, j, w, t in d["edges"]],
        int(d["label"]), d.get("label_name", ""),
    )


def _dynamic_to_dict(g: DynamicGraphSequence) -> dict:
    return {
        "center": g.center, "nodes": g.nodes,
        "features": [f.as_tuple() for f in g.features],
        "slices": [[list(e) for e in s] for s in g.slices],
        "label": g.label, "label_name": g.label_name,
    }


def _dynamic_from_dict(d: dict) -> DynamicGraphSequence:
    return DynamicGraphSequence(
        d["center"], list(d["nodes"]),
        [AccountFeatureVector.from_sequence(f) for f in d["features"]],
        [[(int(i), int(j), float(w)) for i, j, w in s] for s in d["slices"]],
        int(d["label"]), d.get("label_name", ""),
    )


def instance_to_dict(g: GraphInstance) -> dict:
    return {
        "kind": "instance", "center": g.center, "label": g.label, "label_name": g.label_name,
        "static": _static_to_dict(g.static), "dynamic": _dynamic_to_dict(g.dynamic), "meta": g.meta,
    }


def instance_from_dict(d: dict) -> GraphInstance:
    return GraphInstance(
        d["center"], int(d["label"]), d.get("label_name", ""),
        _static_from_dict(d["static"]), _dynamic_from_dict(d["dynamic"]), dict(d.get("meta", {})),
    )


def _read_lines(path: Path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not lines:
        return []
    if lines[0].strip() != HEADER:
        raise SchemaError(f"{path}: expected header {HEADER!r}, found {lines[0][:40]!r}")
    return [json.loads(s) for s in lines[1:] if s.strip()]


def persist_dataset(directory, instances: Sequence[GraphInstance], manifest: DatasetManifest) -> Path:
    """Write ``graphs.jsonl`` and ``manifest.jsonl`` under ``directory``."""
    manifest.validate()
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / GRAPHS_FILE, "w", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        for g in instances:
            fh.write(json.dumps(instance_to_dict(g), separators=(",", ":")) + "\n")
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        fh.write(json.dumps({"kind": "params", **manifest.params}, sort_keys=True) + "\n")
        for e in manifest.entries:
            fh.write(json.dumps({"kind": "entry", "path": e.path, "label": e.label,
                                 "center": e.center, "split": e.split}) + "\n")
    return out


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    if not (d / GRAPHS_FILE).exists() and not (d / MANIFEST_FILE).exists():
        return Dataset()
    instances = [instance_from_dict(r) for r in _read_lines(d / GRAPHS_FILE) if r.get("kind") == "instance"]
    manifest = DatasetManifest()
    if (d / MANIFEST_FILE).exists():
        for r in _read_lines(d / MANIFEST_FILE):
            kind = r.pop("kind", None)
            if kind == "params":
                manifest.params = r
            elif kind == "entry":
                manifest.entries.append(ManifestEntry(r["path"], int(r["label"]), r["center"], r["split"]))
    manifest.validate()
    return Dataset(instances, manifest)


# -- task assembly ---------------------------------------------------------

def choose_negatives(label_name: str, labels: dict[str, str], index: LedgerIndex, n: int, seed: int) -> list[str]:
    """Pick ``n`` negative centres: other labelled types plus the most active unlabelled accounts."""
    others = sorted(a for a, t in labels.items() if t != label_name and a in index)
    unlabeled = [a for a in index.accounts() if a not in labels]
    unlabeled.sort(key=lambda a: (-index.activity(a), a))
    pool = sorted(set(others) | set(unlabeled[: 2 * n]))
    rng = random.Random(f"{seed}:{label_name}:neg")
    return rng.sample(pool, min(n, len(pool)))


def assign_splits(centers_by_label: dict[int, list[str]], fractions: tuple[float, float, float], seed: int) -> dict[str, str]:
    """Stratified split; each centre lands in exactly one split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"split fractions must sum to 1, got {fractions}")
    rng = random.Random(f"{seed}:split")
    out: dict[str, str] = {}
    for label in sorted(centers_by_label):
        cs = sorted(set(centers_by_label[label]) - set(out))
        rng.shuffle(cs)
        n = len(cs)
        n_tr = int(round(fractions[0] * n))
        n_va = int(round(fractions[1] * n))
        for k, c in enumerate(cs):
            out[c] = "train" if k < n_tr else ("validation" if k < n_tr + n_va else "test")
    return out


def build_task_dataset(
    label_name: str,
    labels: dict[str, str],
    index: LedgerIndex,
    K: int,
    h: int,
    T: int,
    fractions=(0.7, 0.15, 0.15),
    seed: int = 0,
) -> Dataset:
    """Binary dataset for one account type: positives of that type, matched negatives."""
    pos = sorted(a for a, t in labels.items() if t == label_name and a in index)
    if not pos:
        raise ValidationError(f"no labelled accounts of type {label_name!r} in the ledger")
    neg = [a for a in choose_negatives(label_name, labels, index, len(pos), seed) if a not in set(pos)]
    splits = assign_splits({1: pos, 0: neg}, fractions, seed)
    instances: list[GraphInstance] = []
    entries: list[ManifestEntry] = []
    for y, centers in ((1, pos), (0, neg)):
        for c in centers:
            g = build_instance(c, index, K, h, T, y, label_name)
            g.meta["source_label"] = labels.get(c, "")
            instances.append(g)
    instances.sort(key=lambda g: g.center)
    for g in instances:
        entries.append(ManifestEntry(GRAPHS_FILE, g.label, g.center, splits[g.center]))
    manifest = DatasetManifest(entries, {"K": K, "h": h, "T": T, "label_name": label_name, "seed": seed})
    manifest.validate()
    return Dataset(instances, manifest)
