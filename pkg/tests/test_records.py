import io

import pytest

from dbg4eth.errors import SchemaError
from dbg4eth.ingest import parse_labels, parse_transactions, parse_transactions_report, write_transactions
from oracles import tx

HEADER = "tx_id,sender,receiver,value_wei,timestamp,gas_price_wei,gas_used,sender_is_contract,receiver_is_contract,status\n"


def test_one_row_keeps_wei():
    recs = parse_transactions(io.StringIO(HEADER + "t1,0xA,0xb,1000000000000000000,5,1,21000,0,1,submitted\n"))
    assert len(recs) == 1
    r = recs[0]
    assert r.value == 10**18 and r.sender == "0xa" and r.receiver_is_contract and not r.sender_is_contract


def test_header_only():
    assert parse_transactions(io.StringIO(HEADER)) == []


def test_bad_timestamp_row_is_skipped():
    body = ("t1,a,b,1,5,1,1,0,0,submitted\n"
            "t2,a,b,1,oops,1,1,0,0,submitted\n"
            "t3,b,a,2,6,1,1,0,0,submitted\n")
    recs, skipped = parse_transactions_report(io.StringIO(HEADER + body))
    assert [r.tx_id for r in recs] == ["t1", "t3"]
    assert len(skipped) == 1 and skipped[0][0] == 3


def test_unsubmitted_dropped_silently():
    body = "t1,a,b,1,5,1,1,0,0,unsubmitted\nt2,a,b,1,5,1,1,0,0,submitted\n"
    recs, skipped = parse_transactions_report(io.StringIO(HEADER + body))
    assert [r.tx_id for r in recs] == ["t2"] and skipped == []


def test_missing_column_is_fatal():
    with pytest.raises(SchemaError):
        parse_transactions(io.StringIO("tx_id,sender,receiver\n1,a,b\n"))


def test_labels_lowercased():
    labels = parse_labels(io.StringIO("address,label_name\n0xAB,phishing\n\n"))
    assert labels == {"0xab": "phishing"}


def test_write_then_parse_round_trip():
    recs = [tx(1, "a", "b", eth=1.5, ts=3, gas_price=7, gas_used=9, rc=True)]
    buf = io.StringIO()
    write_transactions(buf, recs, unsubmitted=[tx(2, "a", "c", eth=1)])
    buf.seek(0)
    assert parse_transactions(buf) == recs
