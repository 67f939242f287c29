import json
import random
from dataclasses import replace

import pytest

from triple_entry import journal as jr
from triple_entry import protocol as pr
from triple_entry.errors import (
    BadReceipt,
    ChainMismatch,
    CorruptFile,
    DuplicateEntryId,
    UnknownAlias,
)

from builders import Parties, build_journal, make_receipt


def test_genesis_append(parties):
    j = jr.SharedJournal("str", parties.registry)
    assert j.head_hash == pr.GENESIS_HASH and len(j) == 0
    r = make_receipt(parties, "buyer", "seller", 10)
    assert j.append(r) == 0
    assert j.head_hash == r.receipt_hash and j[0] == r


def test_append_rejects_wrong_link_and_duplicates(parties):
    j = build_journal(parties, 2)
    stale = make_receipt(parties, "buyer", "seller", 1, prev_hash=pr.GENESIS_HASH, seq=2, i=77)
    with pytest.raises(ChainMismatch):
        j.append(stale)
    dup = make_receipt(parties, "buyer", "seller", 1, prev_hash=j.head_hash, seq=2, i=0)
    with pytest.raises(DuplicateEntryId):
        j.append(dup)
    assert len(j) == 2


def test_append_rejects_foreign_validator(parties):
    other = Parties("buyer", "seller", validator="other")
    j = jr.SharedJournal("str", other.registry)
    with pytest.raises(BadReceipt):
        j.append(make_receipt(other, "buyer", "seller", 5))


def test_verify_100_receipts(parties):
    j = build_journal(parties, 100, random.Random(3))
    report = jr.verify_chain(j, parties.registry)
    assert report.ok and report.verified == 100 and report.head_hash == j.head_hash


def test_amount_change_at_index_40_is_pinpointed(parties):
    j = build_journal(parties, 100, random.Random(3))
    r = j[40]
    j._receipts[40] = replace(r, entry=replace(r.entry, core=replace(r.core, amount=r.core.amount + 1)))
    report = jr.verify_chain(j, parties.registry)
    assert not report.ok and report.failed_index == 40 and report.check == "signature"
    assert report.verified == 40


def test_truncation_flagged_by_length(parties, tmp_path):
    j = build_journal(parties, 10)
    path = tmp_path / "j.jsonl"
    jr.persist(j, path)
    lines = path.read_bytes().split(b"\n")
    truncated = b"\n".join(lines[:-2]) + b"\n"  # drop last record
    report = jr.verify_bytes(truncated, parties.registry)
    assert not report.ok and report.check == "length"
    path.write_bytes(truncated)
    with pytest.raises(ChainMismatch):
        jr.load(path, parties.registry)


def test_read_view(parties):
    j = build_journal(parties, 4, pairs=[("buyer", "seller"), ("seller", "stranger")])
    assert len(jr.read_view(j, "str")) == 4
    assert len(jr.read_view(j, "buyer")) == 2
    assert len(jr.read_view(j, "stranger")) == 2
    j.set_visibility(j[0].entry_id, jr.PUBLIC)
    j.set_visibility(j[2].entry_id, jr.Visibility(aliases=frozenset({"buyer"})))
    assert [r.seq for r in jr.read_view(j, "buyer")] == [0, 2]
    assert [r.seq for r in jr.read_view(j, "stranger")] == [0, 1, 3]
    with pytest.raises(UnknownAlias):
        jr.read_view(j, "nobody")


def test_parties_share_identical_records(parties):
    """Both parties see byte-identical copies of their common entries."""
    j = build_journal(parties, 6)
    a = jr.read_view(j, "buyer")
    b = jr.read_view(j, "seller")
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_persist_load_roundtrip(parties, tmp_path):
    j = build_journal(parties, 50, random.Random(9))
    j.attach_stub(j[3].entry_id, pr.Stub("seller", "note ✓".encode()))
    j.set_visibility(j[4].entry_id, jr.PUBLIC)
    path = tmp_path / "j.jsonl"
    jr.persist(j, path)
    again = jr.load(path, parties.registry)
    assert again == j
    assert again.head_hash == j.head_hash
    assert again[3].stubs == j[3].stubs
    assert again.visibility(j[4].entry_id) == jr.PUBLIC
    assert jr.dumps(again) == path.read_text(encoding="utf-8")


def test_file_shape(parties, tmp_path):
    j = build_journal(parties, 2)
    text = jr.dumps(j)
    lines = text.splitlines()
    header = json.loads(lines[0])
    assert header["length"] == 2 and header["head"] == j.head_hash.hex()
    assert header["hash"] == "sha256" and header["validator"] == "str"
    assert all(json.loads(l)["seq"] == i for i, l in enumerate(lines[1:]))


def test_empty_file_is_empty_journal(parties, tmp_path):
    path = tmp_path / "j.jsonl"
    path.write_bytes(b"")
    assert len(jr.load(path, parties.registry)) == 0
    jr.persist(jr.SharedJournal("str", parties.registry), path)
    assert len(jr.load(path, parties.registry)) == 0


def test_edited_hex_is_detected(parties, tmp_path):
    j = build_journal(parties, 5)
    path = tmp_path / "j.jsonl"
    jr.persist(j, path)
    raw = path.read_bytes()
    sig = j[2].entry.payer_sig.value.hex()
    idx = raw.index(sig.encode())
    ch = raw[idx : idx + 1]
    edited = raw[:idx] + (b"1" if ch != b"1" else b"2") + raw[idx + 1 :]
    path.write_bytes(edited)
    with pytest.raises((BadReceipt, ChainMismatch, CorruptFile)):
        jr.load(path, parties.registry)
    report = jr.verify_file(path, parties.registry)
    assert not report.ok and report.failed_index == 2


def test_noncanonical_whitespace_is_corrupt(parties, tmp_path):
    j = build_journal(parties, 2)
    path = tmp_path / "j.jsonl"
    text = jr.dumps(j).replace('{"', '{ "', 2)
    path.write_text(text, encoding="utf-8")
    with pytest.raises(CorruptFile) as info:
        jr.load(path, parties.registry)
    assert info.value.offset == 0
    report = jr.verify_file(path, parties.registry)
    assert report.check == "corrupt"


def test_missing_trailing_newline(parties):
    raw = jr.dumps(build_journal(parties, 1)).encode()[:-1]
    assert jr.verify_bytes(raw, parties.registry).check == "corrupt"


def test_report_serialisation(parties):
    report = jr.verify_chain(build_journal(parties, 1), parties.registry)
    d = report.to_dict()
    assert d["ok"] is True and d["length"] == 1 and len(d["head_hash"]) == 64
    assert report.describe().startswith("OK")
