import numpy as np
import pytest

from dbg4eth.errors import UnknownAccountError, ValidationError
from dbg4eth.ingest import LedgerIndex, sample_khop, top_k_neighbors
from oracles import brute_ranking, random_ledger, tx


def test_top_k_by_average():
    led = [tx(1, "c", "x9", eth=9), tx(2, "c", "x5", eth=5), tx(3, "x3", "c", eth=3)]
    sub = sample_khop("c", led, K=2, h=1)
    assert set(sub.nodes) == {"c", "x9", "x5"}
    assert {r.tx_id for r in sub.transactions} == {"1", "2"}


def test_k_above_degree_keeps_all():
    led = [tx(1, "c", "a", eth=1), tx(2, "c", "b", eth=2)]
    assert sorted(sample_khop("c", led, K=50, h=1).nodes) == ["a", "b", "c"]


def test_tie_broken_by_total():
    led = [tx(1, "c", "lo", eth=4), tx(2, "c", "hi", eth=4), tx(3, "c", "hi", eth=4), tx(4, "c", "z", eth=1)]
    assert top_k_neighbors(LedgerIndex(led), "c", 1) == ["hi"]


def test_tie_broken_by_address():
    led = [tx(1, "c", "b", eth=4), tx(2, "c", "a", eth=4)]
    assert top_k_neighbors(LedgerIndex(led), "c", 2) == ["a", "b"]


def test_errors():
    led = [tx(1, "a", "b", eth=1)]
    with pytest.raises(UnknownAccountError):
        sample_khop("zz", led, 2, 1)
    with pytest.raises(ValidationError):
        sample_khop("a", led, 0, 1)


def test_two_hops_expand_each_node_once():
    led = [tx(1, "c", "a", eth=1), tx(2, "a", "b", eth=1), tx(3, "b", "c", eth=1), tx(4, "b", "d", eth=1)]
    sub = sample_khop("c", led, K=5, h=2)
    assert sub.nodes[0] == "c"
    assert set(sub.nodes) == {"a", "b", "c", "d"}
    expanded = [v for hop in sub.kept for v in hop]
    assert len(expanded) == len(set(expanded))


@pytest.mark.parametrize("seed", range(20))
def test_ranking_and_bounds_random(seed):
    rng = np.random.default_rng(seed)
    led = random_ledger(rng, ties=True)
    index = LedgerIndex(led)
    for v in index.accounts():
        for K in (1, 2, 3):
            assert top_k_neighbors(index, v, K) == brute_ranking(led, v)[:K]
    center = led[0].sender
    a, b = sample_khop(center, index, 2, 2), sample_khop(center, led, 2, 2)
    assert a == b
    assert all(len(kept) <= 2 for hop in a.kept for kept in hop.values())
