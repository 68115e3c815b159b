"""Synthetic ledgers with behaviourally distinct account archetypes.

* exchange: hub with many counterparties, two-way flow at a steady tempo over
  the whole horizon.
* phishing: short-lived; a burst of small inflows from many victims followed
  by a quick fan-out of the proceeds.
* mining: periodic payouts of near-constant value from one pool contract, few
  counterparties.

Unlabelled "active user" accounts and a background population supply
counterparties, high-activity negatives and second-hop structure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .ingest.records import TransactionRecord, write_labels, write_transactions

ARCHETYPES = ("exchange", "phishing", "mining")
MIN_PER_ARCHETYPE = 10
START = 1_600_000_000
DAY = 86_400
HORIZON = 120 * DAY
GWEI = 10**9
WEI = 10**18


@dataclass
class SyntheticLedger:
    transactions: list[TransactionRecord]
    unsubmitted: list[TransactionRecord]
    labels: dict[str, str]


class _Gen:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.txs: list[TransactionRecord] = []
        self.dropped: list[TransactionRecord] = []
        self.contracts: set[str] = set()

    def address(self) -> str:
        return "0x" + format(self.rng.getrandbits(160), "040x")

    def eth(self, mu: float, sigma: float) -> int:
        return max(1, int(self.rng.lognormvariate(mu, sigma) * WEI))

    def tx(self, sender: str, receiver: str, value: int, ts: int, may_fail: bool = True) -> None:
        contract_call = receiver in self.contracts or sender in self.contracts
        rec = TransactionRecord(
            tx_id="0x" + format(self.rng.getrandbits(256), "064x"),
            sender=sender,
            receiver=receiver,
            value=value,
            timestamp=int(ts),
            gas_price=self.rng.randint(10, 80) * GWEI,
            gas_used=self.rng.randint(45_000, 150_000) if contract_call else 21_000,
            sender_is_contract=sender in self.contracts,
            receiver_is_contract=receiver in self.contracts,
        )
        # a small share of failed/unsubmitted records exercises filtering on ingest
        (self.dropped if may_fail and self.rng.random() < 0.01 else self.txs).append(rec)


def generate_synthetic(archetypes=ARCHETYPES, n_accounts: int = 200, seed: int = 0) -> SyntheticLedger:
    """Generate ``n_accounts`` labelled accounts per archetype plus supporting population."""
    archetypes = tuple(archetypes)
    unknown = set(archetypes) - set(ARCHETYPES)
    if unknown:
        raise ValidationError(f"unknown archetype(s) {sorted(unknown)}; choose from {ARCHETYPES}")
    if not archetypes:
        raise ValidationError("at least one archetype is required")
    if n_accounts < MIN_PER_ARCHETYPE:
        raise ValidationError(f"need at least {MIN_PER_ARCHETYPE} accounts per archetype, got {n_accounts}")

    g = _Gen(seed)
    rng = g.rng
    background = [g.address() for _ in range(10 * n_accounts)]
    labels: dict[str, str] = {}

    # unlabelled active users: moderate, irregular two-way activity
    for _ in range(n_accounts):
        a = g.address()
        peers = rng.sample(background, rng.randint(6, 14))
        t0 = START + rng.randint(0, HORIZON - 60 * DAY)
        for _ in range(rng.randint(15, 30)):
            ts = t0 + rng.randint(0, 60 * DAY)
            b = rng.choice(peers)
            if rng.random() < 0.5:
                g.tx(a, b, g.eth(-1.0, 1.0), ts)
            else:
                g.tx(b, a, g.eth(-1.0, 1.0), ts)

    if "exchange" in archetypes:
        for _ in range(n_accounts):
            a = g.address()
            labels[a] = "exchange"
            peers = rng.sample(background, rng.randint(40, 70))
            n_tx = rng.randint(60, 120)
            step = HORIZON / n_tx
            for k in range(n_tx):
                ts = START + int(k * step + rng.uniform(0, 0.3) * step)
                b = rng.choice(peers)
                if rng.random() < 0.5:
                    g.tx(b, a, g.eth(1.0, 0.8), ts)  # deposit
                else:
                    g.tx(a, b, g.eth(1.0, 0.8), ts)  # withdrawal

    if "phishing" in archetypes:
        for _ in range(n_accounts):
            a = g.address()
            labels[a] = "phishing"
            t0 = START + rng.randint(0, HORIZON - 5 * DAY)
            life = rng.randint(1, 3) * DAY
            victims = rng.sample(background, rng.randint(10, 25))
            total = 0
            for v in victims:
                value = g.eth(-0.5, 0.7)
                total += value
                g.tx(v, a, value, t0 + rng.randint(0, int(0.4 * life)))
            outs = rng.sample(background, rng.randint(3, 6))
            share = total // len(outs)
            for o in outs:
                g.tx(a, o, share, t0 + int(0.7 * life) + rng.randint(0, int(0.3 * life)))

    if "mining" in archetypes:
        pools = [g.address() for _ in range(max(2, n_accounts // 20))]
        g.contracts.update(pools)
        for _ in range(n_accounts):
            a = g.address()
            labels[a] = "mining"
            pool = rng.choice(pools)
            period = rng.choice((12, 16, 20, 24)) * 3600
            payout = rng.uniform(0.5, 3.0)
            t = START + rng.randint(0, 30 * DAY)
            stop = t + rng.randint(40, 60) * DAY
            while t < stop:
                # payouts never fail so the inflow period stays regular
                g.tx(pool, a, int(payout * rng.uniform(0.99, 1.01) * WEI), t, may_fail=False)
                t += int(period * rng.uniform(0.98, 1.02))
            for b in rng.sample(background, rng.randint(1, 2)):
                g.tx(a, b, int(payout * rng.randint(5, 20) * WEI), stop + rng.randint(0, 5 * DAY))

    # sparse background chatter gives second-hop structure
    for b in background:
        for _ in range(rng.randint(0, 3)):
            g.tx(b, rng.choice(background), g.eth(-1.5, 1.0), START + rng.randint(0, HORIZON))

    g.txs.sort(key=lambda r: (r.timestamp, r.tx_id))
    return SyntheticLedger(g.txs, g.dropped, labels)


def write_synthetic(out_dir, archetypes=ARCHETYPES, n_accounts: int = 200, seed: int = 0) -> tuple[Path, Path]:
    ledger = generate_synthetic(archetypes, n_accounts, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tx_path, label_path = out / "transactions.csv", out / "labels.csv"
    with open(tx_path, "w", encoding="utf-8", newline="") as fh:
        write_transactions(fh, ledger.transactions, ledger.unsubmitted)
    with open(label_path, "w", encoding="utf-8", newline="") as fh:
        write_labels(fh, ledger.labels)
    return tx_path, label_path
