"""The 15 per-account transaction statistics attached to every node."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from typing import Iterable

import numpy as np

from .records import WEI_PER_ETH, TransactionRecord

FEATURE_NAMES = (
    "NTS", "STV", "SAV", "min_STI", "max_STI",
    "NTR", "RTV", "RAV", "min_RTI", "max_RTI",
    "SETF", "SAETF", "RETF", "RAETF", "NC",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class AccountFeatureVector:
    """Monetary fields in ETH, intervals in seconds, counts otherwise."""

    NTS: float = 0.0
    STV: float = 0.0
    SAV: float = 0.0
    min_STI: float = 0.0
    max_STI: float = 0.0
    NTR: float = 0.0
    RTV: float = 0.0
    RAV: float = 0.0
    min_RTI: float = 0.0
    max_RTI: float = 0.0
    SETF: float = 0.0
    SAETF: float = 0.0
    RETF: float = 0.0
    RAETF: float = 0.0
    NC: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)

    @classmethod
    def from_sequence(cls, values) -> "AccountFeatureVector":
        values = [float(v) for v in values]
        if len(values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} values, got {len(values)}")
        return cls(*values)


assert tuple(f.name for f in fields(AccountFeatureVector)) == FEATURE_NAMES


def _interval_extrema(times: list[int]) -> tuple[float, float]:
    if len(times) < 2:
        return 0.0, 0.0
    times = sorted(times)
    gaps = [b - a for a, b in zip(times, times[1:])]
    return float(min(gaps)), float(max(gaps))


def extract_node_features(account: str, txs: Iterable[TransactionRecord]) -> AccountFeatureVector:
    """Compute the feature vector of ``account`` from the transactions touching it.

    Transactions not involving ``account`` are ignored. Totals are accumulated
    in Wei and converted once, so ETH fields are correctly rounded.
    """
    sent_v = recv_v = sent_fee = recv_fee = 0
    sent_t: list[int] = []
    recv_t: list[int] = []
    nc = 0
    for r in txs:
        is_s, is_r = r.sender == account, r.receiver == account
        if not (is_s or is_r):
            continue
        if r.sender_is_contract or r.receiver_is_contract:
            nc += 1
        if is_s:
            sent_v += r.value
            sent_fee += r.fee_wei
            sent_t.append(r.timestamp)
        if is_r:
            recv_v += r.value
            recv_fee += r.fee_wei
            recv_t.append(r.timestamp)
    nts, ntr = len(sent_t), len(recv_t)
    min_sti, max_sti = _interval_extrema(sent_t)
    min_rti, max_rti = _interval_extrema(recv_t)
    return AccountFeatureVector(
        NTS=float(nts),
        STV=sent_v / WEI_PER_ETH,
        SAV=sent_v / (nts * WEI_PER_ETH) if nts else 0.0,
        min_STI=min_sti,
        max_STI=max_sti,
        NTR=float(ntr),
        RTV=recv_v / WEI_PER_ETH,
        RAV=recv_v / (ntr * WEI_PER_ETH) if ntr else 0.0,
        min_RTI=min_rti,
        max_RTI=max_rti,
        SETF=sent_fee / WEI_PER_ETH,
        SAETF=sent_fee / (nts * WEI_PER_ETH) if nts else 0.0,
        RETF=recv_fee / WEI_PER_ETH,
        RAETF=recv_fee / (ntr * WEI_PER_ETH) if ntr else 0.0,
        NC=float(nc),
    )
