import random

import pytest
from hypothesis import given, settings, strategies as st

from triple_entry import accounting as ac
from triple_entry import journal as jr
from triple_entry.errors import (
    AlreadyPosted,
    InvariantViolation,
    NotVisible,
    Unbalanced,
    UnmappedAccount,
)

from builders import Parties, build_journal, make_receipt
from oracles import brute_force_balances

D, C = ac.Side.DEBIT, ac.Side.CREDIT


def test_sale_projection_mirrors(parties):
    r = make_receipt(parties, "buyer", "seller", 2500)
    views = ac.project_views(r, ac.default_chart(), ac.default_chart(), ac.sale_mapping())
    payer = {(l.account_code, l.side, l.amount) for l in views.payer_lines}
    payee = {(l.account_code, l.side, l.amount) for l in views.payee_lines}
    assert payer == {("5000", D, 2500), ("2100", C, 2500)}
    assert payee == {("1100", D, 2500), ("4000", C, 2500)}
    assert views.for_party("seller", r) == views.payee_lines
    with pytest.raises(NotVisible):
        views.for_party("stranger", r)


def test_zero_amount_projects_to_nothing(parties):
    j = jr.SharedJournal("str", parties.registry)
    j.append(make_receipt(parties, "buyer", "seller", 0))
    gl = ac.GeneralLedger("buyer")
    ac.post_all(gl, j, ac.sale_mapping())
    assert gl.glt == [] and len(gl.notes) == 1 and "zero amount" in gl.notes[0]
    # noted entries are not re-examined
    assert ac.post_all(gl, j, ac.sale_mapping()) == []


def test_unmapped_chart_account(parties):
    r = make_receipt(parties, "buyer", "seller", 5)
    chart = ac.make_chart([ac.Account("1000", "Cash", ac.Kind.ASSET)])
    with pytest.raises(UnmappedAccount):
        ac.project_views(r, chart, None, ac.sale_mapping())
    with pytest.raises(UnmappedAccount):
        ac.RoleMapping([]).lookup("USD", "sale: x")


def test_mapping_lookup_precedence():
    rules = [
        ac.Rule("*", "*", "a", "b", "c", "d"),
        ac.Rule("USD", "*", "e", "f", "g", "h"),
        ac.Rule("USD", "rent", "i", "j", "k", "l"),
    ]
    m = ac.RoleMapping(rules)
    assert m.lookup("USD", "Rent: March").payer_debit == "i"
    assert m.lookup("USD", "sale: x").payer_debit == "e"
    assert m.lookup("EUR", "rent: x").payer_debit == "a"
    assert ac.memo_class("no prefix") == "*"


def test_mapping_from_yaml(tmp_path):
    path = tmp_path / "m.yaml"
    path.write_text(
        "accounts:\n"
        "  - {code: '100', name: Bank, kind: asset}\n"
        "  - {code: '400', name: Sales, kind: revenue}\n"
        "rules:\n"
        "  - unit: USD\n"
        "    class: sale\n"
        "    payer: {debit: '400', credit: '100'}\n"
        "    payee: {debit: '100', credit: '400'}\n"
    )
    mapping, chart = ac.load_mapping(path)
    assert set(chart) == {"100", "400"}
    assert mapping.lookup("USD", "sale: x").payee_credit == "400"


def test_post_checks(parties):
    j = build_journal(parties, 3, pairs=[("buyer", "seller"), ("seller", "stranger")])
    gl = ac.GeneralLedger("buyer")
    ac.post_receipt(gl, j[0], j, ac.sale_mapping())
    with pytest.raises(AlreadyPosted):
        ac.post_receipt(gl, j[0], j, ac.sale_mapping())
    eid = j[0].entry_id.hex()
    with pytest.raises(Unbalanced):
        ac.post_to_glt(gl, [ac.PostingLine("5000", D, 10, eid)], j)
    # buyer is not a party to entry 1 and it is restricted
    other = j[1].entry_id.hex()
    lines = [ac.PostingLine("5000", D, 1, other), ac.PostingLine("2100", C, 1, other)]
    with pytest.raises(NotVisible):
        ac.post_to_glt(gl, lines, j)
    missing = "00" * 16
    with pytest.raises(NotVisible):
        ac.post_to_glt(gl, [ac.PostingLine("5000", D, 1, missing), ac.PostingLine("2100", C, 1, missing)], j)
    with pytest.raises(InvariantViolation):
        ac.post_to_glt(gl, [ac.PostingLine("5000", D, 1, eid), ac.PostingLine("2100", C, 1, other)], j)


def test_posting_does_not_touch_journal(parties):
    j = build_journal(parties, 5)
    before = jr.dumps(j)
    gl = ac.GeneralLedger("seller")
    ac.post_all(gl, j, ac.sale_mapping())
    ac.adjust_glr(gl, [ac.PostingLine("4000", D, 1, ""), ac.PostingLine("3000", C, 1, "")], "reclass")
    assert jr.dumps(j) == before
    assert len(gl.glt) == 5


def test_depreciation_lives_in_glr(parties):
    j = build_journal(parties, 2)
    gl = ac.GeneralLedger("seller")
    ac.post_all(gl, j, ac.sale_mapping())
    glt_before = ac.trial_balance(gl, "glt")
    ac.adjust_glr(
        gl,
        [ac.PostingLine("6100", D, 1200, "", "USD"), ac.PostingLine("1590", C, 1200, "", "USD")],
        "straight-line depreciation",
        at=5,
    )
    assert gl.glr[0].source_id == "adj-0001"
    assert ac.trial_balance(gl, "glt") == glt_before
    full = ac.trial_balance(gl, "all")
    assert full["6100"] == 1200 and full["1590"] == -1200
    assert sum(full.values()) == 0


def test_adjust_rules(parties):
    gl = ac.GeneralLedger("seller")
    assert ac.adjust_glr(gl, [], "nothing").glr == []
    with pytest.raises(InvariantViolation):
        ac.adjust_glr(gl, [ac.PostingLine("6100", D, 1, ""), ac.PostingLine("1590", C, 1, "")], "")
    with pytest.raises(Unbalanced):
        ac.adjust_glr(gl, [ac.PostingLine("6100", D, 2, ""), ac.PostingLine("1590", C, 1, "")], "x")
    with pytest.raises(UnmappedAccount):
        ac.adjust_glr(gl, [ac.PostingLine("9999", D, 1, ""), ac.PostingLine("1590", C, 1, "")], "x")


def test_random_entries_conserve_and_mirror():
    p = Parties("a", "b", "c")
    rng = random.Random(5)
    j = build_journal(p, 200, rng, pairs=[("a", "b"), ("b", "c"), ("c", "a"), ("b", "a")])
    ledgers = {alias: ac.GeneralLedger(alias) for alias in "abc"}
    for gl in ledgers.values():
        ac.post_all(gl, j, ac.sale_mapping())
    for gl in ledgers.values():
        tb = ac.trial_balance(gl)
        debit, credit = ac.totals(tb)
        assert debit == credit
        dr, cr = brute_force_balances(gl.glt)
        for code, bal in tb.items():
            assert bal == dr.get(code, 0) - cr.get(code, 0)
    # a seller's receivables from X equal X's payables to that seller
    for seller in "abc":
        for buyer in "abc":
            if seller == buyer:
                continue
            ids = {r.entry_id.hex() for r in j if r.core.payee_alias == seller and r.core.payer_alias == buyer}
            ar = sum(l.signed() for p_ in ledgers[seller].glt if p_.source_id in ids for l in p_.lines if l.account_code == "1100")
            ap = sum(l.signed() for p_ in ledgers[buyer].glt if p_.source_id in ids for l in p_.lines if l.account_code == "2100")
            assert ar == -ap


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["1000", "1500", "3000", "4000", "6100"]), st.integers(1, 10**12)), max_size=10))
def test_trial_balance_matches_oracle(pairs):
    gl = ac.GeneralLedger("x")
    for code, amount in pairs:
        ac.adjust_glr(gl, [ac.PostingLine(code, D, amount, ""), ac.PostingLine("2100", C, amount, "")], "r")
    tb = ac.trial_balance(gl, ac.Scope.ALL)
    dr, cr = brute_force_balances(gl.glr)
    assert tb == {code: dr.get(code, 0) - cr.get(code, 0) for code in gl.chart}
    assert sum(tb.values()) == 0


def test_redundancy_counts():
    assert ac.count_redundancy(1, "conventional").record_count == 4
    assert ac.count_redundancy(1, "conventional_with_bank").record_count == 8
    te = ac.count_redundancy(1, "triple_entry")
    assert (te.record_count, te.signature_count) == (1, 3)
    assert ac.count_redundancy(7, ac.Mode.CONVENTIONAL).record_count == 28
    with pytest.raises(InvariantViolation):
        ac.count_redundancy(-1, "triple_entry")


def test_ledger_dict_roundtrip(parties):
    j = build_journal(parties, 3)
    gl = ac.GeneralLedger("buyer")
    ac.post_all(gl, j, ac.sale_mapping())
    ac.adjust_glr(gl, [ac.PostingLine("6100", D, 1, ""), ac.PostingLine("1590", C, 1, "")], "r", 3)
    again = ac.GeneralLedger.from_dict(gl.to_dict())
    assert again == gl


def test_account_name_rules():
    with pytest.raises(InvariantViolation):
        ac.Account("1", "two  spaces", ac.Kind.ASSET)
    assert ac.Account("1", "Cash", ac.Kind.ASSET).normal_side is D
    assert ac.Account("2", "Loan", ac.Kind.LIABILITY).normal_side is C
