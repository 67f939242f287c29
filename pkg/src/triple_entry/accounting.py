"""Per-party general ledgers fed from the shared journal.

A shared receipt is one record; each party sees it through its own chart of
accounts. ``project_views`` turns one receipt into two mirrored double-entry
line sets, ``post_to_glt`` files them in the objective transaction ledger and
``adjust_glr`` keeps subjective reporting adjustments separate.

Nothing in this module can append to or rewrite a journal: it only reads
receipts that have already been validated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import yaml

from .errors import (
    AlreadyPosted,
    BadReceipt,
    InvariantViolation,
    NotVisible,
    Unbalanced,
    UnknownAlias,
    UnmappedAccount,
)
from .identity import Registry
from .protocol import ValidatedReceipt, verify_receipt


class Kind(str, enum.Enum):
    ASSET = "asset"
    LIABILITY = "liability"
    EQUITY = "equity"
    REVENUE = "revenue"
    EXPENSE = "expense"


class Side(str, enum.Enum):
    DEBIT = "debit"
    CREDIT = "credit"


_NORMAL = {
    Kind.ASSET: Side.DEBIT,
    Kind.EXPENSE: Side.DEBIT,
    Kind.LIABILITY: Side.CREDIT,
    Kind.EQUITY: Side.CREDIT,
    Kind.REVENUE: Side.CREDIT,
}


@dataclass(frozen=True)
class Account:
    code: str
    name: str
    kind: Kind

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.code or not self.name:
            raise InvariantViolation("account code and name must be non-empty")
        if "  " in self.name or "\n" in self.name or self.name != self.name.strip():
            raise InvariantViolation(f"account name {self.name!r} not usable in plain text")

    @property
    def normal_side(self) -> Side:
        return _NORMAL[self.kind]


Chart = Mapping[str, Account]


def make_chart(accounts: Iterable[Account]) -> dict[str, Account]:
    chart: dict[str, Account] = {}
    names = set()
    for acct in accounts:
        if acct.code in chart or acct.name in names:
            raise InvariantViolation(f"duplicate account {acct.code}/{acct.name}")
        chart[acct.code] = acct
        names.add(acct.name)
    return chart


def default_chart() -> dict[str, Account]:
    return make_chart(
        [
            Account("1000", "Cash", Kind.ASSET),
            Account("1100", "Accounts Receivable", Kind.ASSET),
            Account("1500", "Equipment", Kind.ASSET),
            Account("1590", "Accumulated Depreciation", Kind.ASSET),
            Account("2100", "Accounts Payable", Kind.LIABILITY),
            Account("3000", "Owner Equity", Kind.EQUITY),
            Account("4000", "Revenue", Kind.REVENUE),
            Account("5000", "Purchases", Kind.EXPENSE),
            Account("6100", "Depreciation Expense", Kind.EXPENSE),
        ]
    )


@dataclass(frozen=True)
class PostingLine:
    account_code: str
    side: Side
    amount: int
    entry_id: str
    unit: str = ""

    def signed(self) -> int:
        return self.amount if self.side is Side.DEBIT else -self.amount

    def to_dict(self) -> dict:
        return {
            "account": self.account_code,
            "side": self.side.value,
            "amount": self.amount,
            "entry_id": self.entry_id,
            "unit": self.unit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PostingLine":
        return cls(d["account"], Side(d["side"]), d["amount"], d["entry_id"], d["unit"])


def _balanced(lines: Sequence[PostingLine]) -> bool:
    return sum(l.signed() for l in lines) == 0


# Rule matching ---------------------------------------------------------------

def memo_class(memo: str) -> str:
    """``"sale: 3 widgets"`` -> ``"sale"``; memos without a prefix have class ``*``."""
    head, sep, _ = memo.partition(":")
    return head.strip().lower() if sep and head.strip() else "*"


@dataclass(frozen=True)
class Rule:
    unit: str
    memo_class: str
    payer_debit: str
    payer_credit: str
    payee_debit: str
    payee_credit: str


class RoleMapping:
    """Explicit (unit, memo class) -> accounts configuration for both roles."""

    def __init__(self, rules: Iterable[Rule]):
        self._rules = {(r.unit, r.memo_class): r for r in rules}

    def lookup(self, unit: str, memo: str) -> Rule:
        cls = memo_class(memo)
        for key in ((unit, cls), (unit, "*"), ("*", cls), ("*", "*")):
            if key in self._rules:
                return self._rules[key]
        raise UnmappedAccount(f"no mapping rule for unit {unit!r}, class {cls!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "RoleMapping":
        rules = []
        for r in data.get("rules", []):
            rules.append(
                Rule(
                    str(r.get("unit", "*")),
                    str(r.get("class", "*")).lower(),
                    str(r["payer"]["debit"]),
                    str(r["payer"]["credit"]),
                    str(r["payee"]["debit"]),
                    str(r["payee"]["credit"]),
                )
            )
        return cls(rules)


def sale_mapping() -> RoleMapping:
    """Credit sale: the buyer pays, the seller is paid."""
    return RoleMapping([Rule("*", "*", "5000", "2100", "1100", "4000")])


def load_mapping(path: str | Path) -> tuple[RoleMapping, Optional[dict[str, Account]]]:
    """Read a YAML/JSON mapping file: ``rules`` plus an optional ``accounts`` chart."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    chart = None
    if "accounts" in data:
        chart = make_chart(
            Account(str(a["code"]), a["name"], Kind(a["kind"])) for a in data["accounts"]
        )
    return RoleMapping.from_dict(data), chart


# Projection ------------------------------------------------------------------

@dataclass(frozen=True)
class ViewPair:
    payer_lines: tuple[PostingLine, ...]
    payee_lines: tuple[PostingLine, ...]
    note: str = ""

    def for_party(self, alias: str, receipt: ValidatedReceipt) -> tuple[PostingLine, ...]:
        if alias == receipt.core.payer_alias:
            return self.payer_lines
        if alias == receipt.core.payee_alias:
            return self.payee_lines
        raise NotVisible(f"{alias!r} is not a party to {receipt.entry_id.hex()}")


def _require(chart: Optional[Chart], code: str, who: str) -> None:
    if chart is not None and code not in chart:
        raise UnmappedAccount(f"{who} account {code!r} not in chart")


def project_views(
    receipt: ValidatedReceipt,
    payer_chart: Optional[Chart],
    payee_chart: Optional[Chart],
    mapping: RoleMapping,
) -> ViewPair:
    """Split one shared entry into the payer's and payee's double-entry lines.

    A ``None`` chart skips the membership check for that side.
    """
    core = receipt.core
    if core.amount == 0:
        return ViewPair((), (), note="zero amount: no lines posted")
    rule = mapping.lookup(core.unit, core.memo)
    _require(payer_chart, rule.payer_debit, "payer debit")
    _require(payer_chart, rule.payer_credit, "payer credit")
    _require(payee_chart, rule.payee_debit, "payee debit")
    _require(payee_chart, rule.payee_credit, "payee credit")
    eid = core.entry_id.hex()
    line = lambda code, side: PostingLine(code, side, core.amount, eid, core.unit)  # noqa: E731
    return ViewPair(
        (line(rule.payer_debit, Side.DEBIT), line(rule.payer_credit, Side.CREDIT)),
        (line(rule.payee_debit, Side.DEBIT), line(rule.payee_credit, Side.CREDIT)),
    )


# General ledger --------------------------------------------------------------

@dataclass(frozen=True)
class Posting:
    source_id: str
    at: int
    memo: str
    lines: tuple[PostingLine, ...]

    def to_dict(self) -> dict:
        return {
            "source": self.source_id,
            "at": self.at,
            "memo": self.memo,
            "lines": [l.to_dict() for l in self.lines],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Posting":
        return cls(d["source"], d["at"], d["memo"], tuple(PostingLine.from_dict(l) for l in d["lines"]))


@dataclass
class GeneralLedger:
    """GLT holds receipt-sourced postings; GLR holds reasoned adjustments."""

    owner_alias: str
    chart: dict[str, Account] = field(default_factory=default_chart)
    glt: list[Posting] = field(default_factory=list)
    glr: list[Posting] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def posted_ids(self) -> set[str]:
        return {p.source_id for p in self.glt}

    def to_dict(self) -> dict:
        return {
            "owner": self.owner_alias,
            "accounts": [
                {"code": a.code, "name": a.name, "kind": a.kind.value} for a in self.chart.values()
            ],
            "glt": [p.to_dict() for p in self.glt],
            "glr": [p.to_dict() for p in self.glr],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneralLedger":
        chart = make_chart(Account(a["code"], a["name"], Kind(a["kind"])) for a in d["accounts"])
        return cls(
            d["owner"],
            chart,
            [Posting.from_dict(p) for p in d["glt"]],
            [Posting.from_dict(p) for p in d["glr"]],
            list(d.get("notes", [])),
        )


def _check_lines(gl: GeneralLedger, lines: Sequence[PostingLine]) -> None:
    for l in lines:
        if type(l.amount) is not int or l.amount <= 0:
            raise InvariantViolation("posting amounts must be positive integers")
        if l.account_code not in gl.chart:
            raise UnmappedAccount(f"account {l.account_code!r} not in {gl.owner_alias}'s chart")


def post_to_glt(
    gl: GeneralLedger,
    lines: Sequence[PostingLine],
    journal,
    registry: Optional[Registry] = None,
) -> GeneralLedger:
    """File one receipt's lines in the GLT after checking they trace to the journal.

    ``journal`` is only read. Returns ``gl`` (updated in place).
    """
    if not lines:
        return gl
    ids = {l.entry_id for l in lines}
    if len(ids) != 1:
        raise InvariantViolation("lines must come from a single entry")
    (eid,) = ids
    if not _balanced(lines):
        raise Unbalanced(f"entry {eid}: debits != credits")
    _check_lines(gl, lines)
    if eid in gl.posted_ids:
        raise AlreadyPosted(eid)
    try:
        receipt = journal.find(bytes.fromhex(eid))
    except ValueError:
        receipt = None
    if receipt is None or not journal.can_see(gl.owner_alias, receipt):
        raise NotVisible(f"entry {eid} not visible to {gl.owner_alias}")
    try:
        report = verify_receipt(receipt, registry or journal.registry)
    except UnknownAlias as exc:
        raise BadReceipt(f"unknown alias {exc}") from None
    if not report.passed:
        raise BadReceipt(f"entry {eid} fails verification")
    gl.glt.append(Posting(eid, receipt.core.created_at, receipt.core.memo, tuple(lines)))
    return gl


def post_receipt(
    gl: GeneralLedger,
    receipt: ValidatedReceipt,
    journal,
    mapping: RoleMapping,
) -> GeneralLedger:
    """Project ``receipt`` for the ledger owner and post their side."""
    payer_chart = gl.chart if gl.owner_alias == receipt.core.payer_alias else None
    payee_chart = gl.chart if gl.owner_alias == receipt.core.payee_alias else None
    views = project_views(receipt, payer_chart, payee_chart, mapping)
    lines = views.for_party(gl.owner_alias, receipt)
    if not lines:
        gl.notes.append(f"{receipt.entry_id.hex()}: {views.note}")
        return gl
    return post_to_glt(gl, lines, journal)


def post_all(gl: GeneralLedger, journal, mapping: RoleMapping) -> list[str]:
    """Post every visible, not-yet-posted receipt the owner is a party to."""
    done = []
    noted = {n.split(":", 1)[0] for n in gl.notes}
    for receipt in journal:
        eid = receipt.entry_id.hex()
        if gl.owner_alias not in receipt.core.parties():
            continue
        if eid in gl.posted_ids or eid in noted:
            continue
        post_receipt(gl, receipt, journal, mapping)
        done.append(eid)
    return done


def adjust_glr(
    gl: GeneralLedger,
    lines: Sequence[PostingLine],
    reason: str,
    at: int = 0,
    adj_id: Optional[str] = None,
) -> GeneralLedger:
    if not lines:
        return gl
    if not reason:
        raise InvariantViolation("adjustments need a reason")
    if not _balanced(lines):
        raise Unbalanced("adjustment debits != credits")
    _check_lines(gl, lines)
    adj_id = adj_id or f"adj-{len(gl.glr) + 1:04d}"
    lines = tuple(
        PostingLine(l.account_code, l.side, l.amount, adj_id, l.unit) for l in lines
    )
    gl.glr.append(Posting(adj_id, at, reason, lines))
    return gl


class Scope(str, enum.Enum):
    GLT = "glt"
    ALL = "all"


def trial_balance(gl: GeneralLedger, scope: Scope | str = Scope.GLT) -> dict[str, int]:
    """Signed balance per account code, debit positive."""
    scope = Scope(scope)
    balances = {code: 0 for code in gl.chart}
    postings = gl.glt + gl.glr if scope is Scope.ALL else gl.glt
    for p in postings:
        for l in p.lines:
            balances[l.account_code] = balances.get(l.account_code, 0) + l.signed()
    return balances


def totals(balances: Mapping[str, int]) -> tuple[int, int]:
    """(sum of debit balances, sum of credit balances)."""
    debit = sum(v for v in balances.values() if v > 0)
    credit = -sum(v for v in balances.values() if v < 0)
    return debit, credit


# Redundancy ------------------------------------------------------------------

class Mode(str, enum.Enum):
    CONVENTIONAL = "conventional"
    CONVENTIONAL_WITH_BANK = "conventional_with_bank"
    TRIPLE_ENTRY = "triple_entry"


@dataclass(frozen=True)
class RedundancyReport:
    mode: Mode
    n_transactions: int
    record_count: int
    signature_count: int


def count_redundancy(n_transactions: int, mode: Mode | str) -> RedundancyReport:
    """Records needed for ``n`` two-party transactions under each bookkeeping regime.

    Conventional: each party books its own two lines (4 per transaction);
    bank clearing doubles that. Triple entry keeps one shared record carrying
    three signatures.
    """
    mode = Mode(mode)
    n = n_transactions
    if n < 0:
        raise InvariantViolation("n must be >= 0")
    if mode is Mode.CONVENTIONAL:
        return RedundancyReport(mode, n, 4 * n, 0)
    if mode is Mode.CONVENTIONAL_WITH_BANK:
        return RedundancyReport(mode, n, 8 * n, 0)
    return RedundancyReport(mode, n, n, 3 * n)
