"""Transaction and label CSV parsing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, TextIO

from ..errors import SchemaError

log = logging.getLogger(__name__)

WEI_PER_ETH = 10**18

TX_COLUMNS = (
    "tx_id",
    "sender",
    "receiver",
    "value_wei",
    "timestamp",
    "gas_price_wei",
    "gas_used",
    "sender_is_contract",
    "receiver_is_contract",
    "status",
)
LABEL_COLUMNS = ("address", "label_name")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    tx_id: str
    sender: str
    receiver: str
    value: int  # Wei
    timestamp: int  # Unix seconds
    gas_price: int  # Wei
    gas_used: int
    sender_is_contract: bool = False
    receiver_is_contract: bool = False

    @property
    def value_eth(self) -> float:
        return self.value / WEI_PER_ETH

    @property
    def fee_wei(self) -> int:
        return self.gas_price * self.gas_used


def _flag(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _nonneg_int(text: str, name: str) -> int:
    v = int(text.strip())
    if v < 0:
        raise ValueError(f"{name} is negative")
    return v


def _check_header(header: list[str] | None, required: tuple[str, ...], what: str) -> dict[str, int]:
    if header is None:
        raise SchemaError(f"{what}: missing header row")
    cols = [h.strip() for h in header]
    missing = [c for c in required if c not in cols]
    if missing:
        raise SchemaError(f"{what}: missing required column(s) {', '.join(missing)}")
    return {c: cols.index(c) for c in required}


def parse_transactions_report(stream: TextIO) -> tuple[list[TransactionRecord], list[tuple[int, str]]]:
    """Parse a transactions CSV, returning ``(records, skipped)``.

    ``skipped`` holds ``(line_number, reason)`` for each malformed row. Rows
    whose status is ``unsubmitted`` are dropped silently; they are not errors.
    """
    reader = csv.reader(stream)
    pos = _check_header(next(reader, None), TX_COLUMNS, "transactions")
    records: list[TransactionRecord] = []
    skipped: list[tuple[int, str]] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        try:
            get = lambda c: row[pos[c]]  # noqa: E731
            status = get("status").strip().lower()
            if status not in ("submitted", "unsubmitted"):
                raise ValueError(f"unknown status {status!r}")
            sender = get("sender").strip().lower()
            receiver = get("receiver").strip().lower()
            if not sender or not receiver:
                raise ValueError("empty address")
            rec = TransactionRecord(
                tx_id=get("tx_id").strip(),
                sender=sender,
                receiver=receiver,
                value=_nonneg_int(get("value_wei"), "value_wei"),
                timestamp=int(get("timestamp").strip()),
                gas_price=_nonneg_int(get("gas_price_wei"), "gas_price_wei"),
                gas_used=_nonneg_int(get("gas_used"), "gas_used"),
                sender_is_contract=_flag(get("sender_is_contract")),
                receiver_is_contract=_flag(get("receiver_is_contract")),
            )
        except (ValueError, IndexError) as exc:
            log.warning("transactions line %d skipped: %s", line, exc)
            skipped.append((line, str(exc)))
            continue
        if status == "unsubmitted":
            continue
        records.append(rec)
    return records, skipped


def parse_transactions(stream: TextIO) -> list[TransactionRecord]:
    return parse_transactions_report(stream)[0]


def parse_labels(stream: TextIO) -> dict[str, str]:
    reader = csv.reader(stream)
    pos = _check_header(next(reader, None), LABEL_COLUMNS, "labels")
    labels: dict[str, str] = {}
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        try:
            addr = row[pos["address"]].strip().lower()
            name = row[pos["label_name"]].strip()
        except IndexError:
            log.warning("labels line %d skipped: short row", reader.line_num)
            continue
        if addr and name:
            labels[addr] = name
    return labels


def write_transactions(stream: TextIO, records: Iterable[TransactionRecord], unsubmitted: Iterable[TransactionRecord] = ()) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TX_COLUMNS)
    for status, recs in (("submitted", records), ("unsubmitted", unsubmitted)):
        for r in recs:
            w.writerow([
                r.tx_id, r.sender, r.receiver, r.value, r.timestamp, r.gas_price, r.gas_used,
                int(r.sender_is_contract), int(r.receiver_is_contract), status,
            ])


def write_labels(stream: TextIO, labels: dict[str, str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LABEL_COLUMNS)
    for addr, name in labels.items():
        w.writerow([addr, name])
