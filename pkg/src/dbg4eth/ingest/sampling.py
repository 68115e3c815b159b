"""Account-centred k-hop sampling with top-K neighbour selection."""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..errors import UnknownAccountError, ValidationError
from .records import TransactionRecord


class LedgerIndex:
    """Per-account view of a ledger: counterparty -> transactions in either direction."""

    def __init__(self, records: Sequence[TransactionRecord]):
        self.records = list(records)
        pairs: dict[str, dict[str, list[int]]] = defaultdict(lambda: defaultdict(list))
        for k, r in enumerate(self.records):
            pairs[r.sender][r.receiver].append(k)
            if r.receiver != r.sender:
                pairs[r.receiver][r.sender].append(k)
        self._pairs = {a: dict(c) for a, c in pairs.items()}

    def __contains__(self, address: str) -> bool:
        return address in self._pairs

    def accounts(self):
        return self._pairs.keys()

    def counterparties(self, address: str) -> dict[str, list[int]]:
        return self._pairs.get(address, {})

    def activity(self, address: str) -> int:
        return sum(len(v) for v in self.counterparties(address).values())


def rank_key(address: str, total_wei: int, count: int):
    """Sort key for neighbour ranking: average value desc, total desc, address asc."""
    return (-Fraction(total_wei, count), -total_wei, address)


def top_k_neighbors(index: LedgerIndex, node: str, K: int) -> list[str]:
    cands = []
    for u, txs in index.counterparties(node).items():
        total = sum(index.records[k].value for k in txs)
        cands.append((rank_key(u, total, len(txs)), u))
    return [u for _, u in heapq.nsmallest(K, cands)]


@dataclass
class SampledSubgraph:
    center: str
    nodes: list[str]
    transactions: list[TransactionRecord]
    # hop -> frontier node -> neighbours kept for it
    kept: list[dict[str, list[str]]] = field(default_factory=list)


def sample_khop(center: str, ledger, K: int, h: int) -> SampledSubgraph:
    """Collect the ``h``-hop neighbourhood of ``center``, keeping at most ``K``
    counterparties per expanded node.

    ``ledger`` is a :class:`LedgerIndex` or a sequence of records. Nodes are
    ordered center first, then by hop and address. Retained transactions are
    every transaction on a kept (node, counterparty) pair, ordered by
    ``(timestamp, tx_id)``.
    """
    if K < 1 or h < 1:
        raise ValidationError(f"K and h must be >= 1 (got K={K}, h={h})")
    index = ledger if isinstance(ledger, LedgerIndex) else LedgerIndex(ledger)
    if center not in index:
        raise UnknownAccountError(f"account {center} does not appear in the ledger")

    nodes = [center]
    seen = {center}
    expanded: set[str] = set()
    tx_ids: set[int] = set()
    kept_log: list[dict[str, list[str]]] = []
    frontier = [center]
    for _ in range(h):
        hop_kept: dict[str, list[str]] = {}
        discovered: set[str] = set()
        for v in sorted(frontier):
            if v in expanded:
                continue
            expanded.add(v)
            kept = top_k_neighbors(index, v, K)
            hop_kept[v] = kept
            pairs = index.counterparties(v)
            for u in kept:
                tx_ids.update(pairs[u])
                if u not in seen:
                    discovered.add(u)
        kept_log.append(hop_kept)
        new = sorted(discovered)
        seen.update(new)
        nodes.extend(new)
        frontier = [u for kept in hop_kept.values() for u in kept if u not in expanded]
    txs = sorted((index.records[k] for k in tx_ids), key=lambda r: (r.timestamp, r.tx_id))
    return SampledSubgraph(center=center, nodes=nodes, transactions=txs, kept=kept_log)
