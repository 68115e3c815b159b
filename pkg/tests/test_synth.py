import numpy as np
import pytest

from dbg4eth.errors import ValidationError
from dbg4eth.ingest import extract_node_features
from dbg4eth.synth import generate_synthetic, write_synthetic


def _by_type(ledger, name):
    return [a for a, t in ledger.labels.items() if t == name]


def test_refuses_small_n():
    with pytest.raises(ValidationError):
        generate_synthetic(("exchange",), 9, seed=0)


def test_deterministic_files(tmp_path):
    a = write_synthetic(tmp_path / "a", ("exchange", "mining"), 10, seed=7)
    b = write_synthetic(tmp_path / "b", ("exchange", "mining"), 10, seed=7)
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_archetype_signatures(small_ledger):
    txs = small_ledger.transactions
    for acct in _by_type(small_ledger, "exchange"):
        f = extract_node_features(acct, txs)
        assert f.NTS + f.NTR >= 30
    for acct in _by_type(small_ledger, "mining"):
        f = extract_node_features(acct, txs)
        assert f.max_RTI > 0 and f.min_RTI / f.max_RTI >= 0.8


def test_labels_cover_requested_archetypes(small_ledger):
    assert sorted(set(small_ledger.labels.values())) == ["exchange", "mining", "phishing"]
    assert all(len(_by_type(small_ledger, t)) == 20 for t in ("exchange", "mining", "phishing"))
    assert len(small_ledger.unsubmitted) > 0
    assert np.all([r.value >= 0 for r in small_ledger.transactions])
