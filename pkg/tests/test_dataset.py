import json

import pytest

from dbg4eth.errors import SchemaError, ValidationError
from dbg4eth.ingest import (
    DatasetManifest,
    LedgerIndex,
    ManifestEntry,
    build_task_dataset,
    load_dataset,
    persist_dataset,
)
from dbg4eth.ingest.dataset import SPLITS


def _dataset(small_ledger):
    return build_task_dataset("phishing", small_ledger.labels, LedgerIndex(small_ledger.transactions), 5, 2, 4)


def test_round_trip(tmp_path, small_ledger):
    ds = _dataset(small_ledger)
    persist_dataset(tmp_path, ds.instances, ds.manifest)
    back = load_dataset(tmp_path)
    assert back.instances == ds.instances
    assert back.manifest.entries == ds.manifest.entries


def test_empty_directory(tmp_path):
    ds = load_dataset(tmp_path)
    assert ds.instances == [] and ds.manifest.entries == []


def test_overlapping_splits_rejected():
    m = DatasetManifest([ManifestEntry("g", 1, "a", "train"), ManifestEntry("g", 1, "a", "test")], {})
    with pytest.raises(ValidationError):
        m.validate()


def test_header_mismatch(tmp_path, small_ledger):
    ds = _dataset(small_ledger)
    persist_dataset(tmp_path, ds.instances, ds.manifest)
    for f in tmp_path.iterdir():
        lines = f.read_text().splitlines()
        lines[0] = json.dumps({"header": "something else"})
        f.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError):
        load_dataset(tmp_path)


def test_splits_are_stratified_and_disjoint(small_ledger):
    ds = _dataset(small_ledger)
    fr = ds.manifest.fractions()
    assert fr["train"] == pytest.approx(0.7, abs=0.05)
    seen = [g.center for s in SPLITS for g in ds.split(s)]
    assert len(seen) == len(set(seen)) == len(ds.instances)
    for s in SPLITS:
        assert {g.label for g in ds.split(s)} == {0, 1}


def test_deterministic(small_ledger):
    assert _dataset(small_ledger).manifest == _dataset(small_ledger).manifest
