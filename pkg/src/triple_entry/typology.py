"""Rule-based classifier for ledger systems.

A :class:`SystemProfile` is a declarative feature vector. :func:`classify`
derives the set of book / distributed-book / triple-entry labels it earns, and
:func:`check_tea_criteria` scores it against the triple-entry accounting
criteria (operational, near-essential, add-ons, further features).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import InconsistentProfile


class BookKind(str, enum.Enum):
    JOURNAL = "journal"
    LEDGER = "ledger"


class Storage(str, enum.Enum):
    SINGLE_MACHINE = "single_machine"
    PARALLEL = "parallel"
    DISTRIBUTED = "distributed"


class Sync(str, enum.Enum):
    MASTER_DUPLICATION = "master_duplication"
    CHANGE_REPLICATION = "change_replication"
    TRUSTLESS_VERIFICATION = "trustless_verification"


class ReadAccess(str, enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


class WriteAccess(str, enum.Enum):
    PERMISSIONLESS = "permissionless"
    PERMISSIONED = "permissioned"
    CONSORTIUM = "consortium"
    OPERATOR_ONLY = "operator_only"


class Addon(str, enum.Enum):
    SETTLEMENT = "settlement"
    SMART_CONTRACTS = "smart_contracts"
    RICARDIAN_CONTRACTS = "ricardian_contracts"
    DISTRIBUTED_LEDGER = "distributed_ledger"
    STUB_STRUCTURE = "stub_structure"
    GL_TRANSACTIONS = "gl_transactions"
    GL_REPORTING = "gl_reporting"
    VIEWING_PERMISSIONS = "viewing_permissions"


class Further(str, enum.Enum):
    SCALABILITY = "scalability"
    COMPLIANCE = "compliance"
    AFFORDABILITY = "affordability"
    USER_FRIENDLINESS = "user_friendliness"


# Open reads allow permissionless/permissioned writes; closed reads allow
# consortium or single-operator ("enterprise") writes.
PERMISSION_MATRIX = {
    ReadAccess.OPEN: {
        WriteAccess.PERMISSIONLESS: "permissionless",
        WriteAccess.PERMISSIONED: "permissioned",
    },
    ReadAccess.CLOSED: {
        WriteAccess.CONSORTIUM: "consortium",
        WriteAccess.OPERATOR_ONLY: "enterprise",
    },
}


@dataclass(frozen=True)
class SystemProfile:
    name: str
    is_transaction_record: bool = True
    book_kind: BookKind = BookKind.JOURNAL
    shared_between_unrelated_parties: bool = False
    storage: Storage = Storage.SINGLE_MACHINE
    sync_mechanism: Sync = Sync.MASTER_DUPLICATION
    block_structured: bool = False
    read_access: ReadAccess = ReadAccess.CLOSED
    write_access: WriteAccess = WriteAccess.OPERATOR_ONLY
    has_three_signature_flow: bool = False
    has_accounting_layer: bool = False
    immutable_record: bool = False
    strong_identity: bool = False
    addons: frozenset[Addon] = frozenset()
    further: frozenset[Further] = frozenset()

    def __post_init__(self):
        conv = {
            "book_kind": BookKind,
            "storage": Storage,
            "sync_mechanism": Sync,
            "read_access": ReadAccess,
            "write_access": WriteAccess,
        }
        try:
            for name, enum_cls in conv.items():
                object.__setattr__(self, name, enum_cls(getattr(self, name)))
            object.__setattr__(self, "addons", frozenset(Addon(a) for a in self.addons))
            object.__setattr__(self, "further", frozenset(Further(f) for f in self.further))
        except ValueError as exc:
            raise InconsistentProfile(str(exc)) from None

    def check(self) -> None:
        if self.block_structured and (
            self.storage is not Storage.DISTRIBUTED
            or self.sync_mechanism is not Sync.TRUSTLESS_VERIFICATION
        ):
            raise InconsistentProfile("block-structured systems are trustless distributed books")
        if self.has_accounting_layer and self.book_kind is not BookKind.LEDGER:
            raise InconsistentProfile("an accounting layer implies a ledger")
        if self.block_structured and self.write_access not in PERMISSION_MATRIX[self.read_access]:
            raise InconsistentProfile(
                f"{self.read_access.value} read access cannot pair with "
                f"{self.write_access.value} writes"
            )

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InconsistentProfile(f"unknown profile keys: {sorted(unknown)}")
        if "name" not in data:
            raise InconsistentProfile("profile needs a name")
        kwargs = dict(data)
        for key in ("addons", "further"):
            if key in kwargs:
                kwargs[key] = frozenset(kwargs[key] or ())
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, frozenset):
                v = sorted(x.value for x in v)
            out[f.name] = v
        return out


def load_profile(path: str | Path) -> SystemProfile:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise InconsistentProfile("profile file must be a key-value mapping")
    return SystemProfile.from_mapping(data)


LABEL_ORDER = (
    "Book",
    "Journal",
    "Ledger",
    "SharedBook",
    "SharedJournal",
    "SharedLedger",
    "DistributedBook",
    "DBT",
    "DJT",
    "DLT",
    "Blockchain",
    "TEB",
    "TEA",
)

ACCOUNTING_LAYER_NOTE = (
    "accounting layer read as: transactions are classified/interpreted, OR the "
    "shared book feeds both parties' general ledgers; where bookkeeping ends "
    "and accounting begins is debatable"
)


@dataclass(frozen=True)
class Classification:
    labels: tuple[str, ...]
    blockchain_variant: tuple[str, str] | None = None
    scorecard: "Scorecard | None" = None

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def display_labels(self) -> list[str]:
        out = []
        for label in self.labels:
            if label == "Blockchain" and self.blockchain_variant:
                out.append("Blockchain({}, {})".format(*self.blockchain_variant))
            else:
                out.append(label)
        return out


def _labels(p: SystemProfile) -> tuple[set[str], tuple[str, str] | None]:
    labels: set[str] = set()
    variant = None
    if not p.is_transaction_record:
        return labels, variant
    book = "Journal" if p.book_kind is BookKind.JOURNAL else "Ledger"
    labels |= {"Book", book}
    if p.shared_between_unrelated_parties:
        labels |= {"SharedBook", "Shared" + book}
    if p.storage is Storage.DISTRIBUTED:
        labels.add("DistributedBook")
        if p.sync_mechanism is Sync.TRUSTLESS_VERIFICATION:
            labels |= {"DBT", "DJT" if book == "Journal" else "DLT"}
            if p.block_structured:
                labels.add("Blockchain")
                variant = (p.read_access.value, PERMISSION_MATRIX[p.read_access][p.write_access])
    if p.has_three_signature_flow and "SharedBook" in labels:
        labels.add("TEB")
        if p.has_accounting_layer:
            labels.add("TEA")
    return labels, variant


def check_lattice(labels) -> None:
    """Subtype implications every label set must satisfy."""
    s = set(labels)
    implications = [
        ("TEA", "TEB"),
        ("TEB", "SharedBook"),
        ("DLT", "DBT"),
        ("DJT", "DBT"),
        ("DBT", "DistributedBook"),
        ("Blockchain", "DBT"),
        ("DistributedBook", "Book"),
        ("SharedBook", "Book"),
        ("Journal", "Book"),
        ("Ledger", "Book"),
    ]
    for sub, sup in implications:
        if sub in s and sup not in s:
            raise AssertionError(f"{sub} without {sup}")


def classify(profile: SystemProfile, with_scorecard: bool = True) -> Classification:
    profile.check()
    labels, variant = _labels(profile)
    check_lattice(labels)
    ordered = tuple(l for l in LABEL_ORDER if l in labels)
    card = check_tea_criteria(profile) if with_scorecard else None
    return Classification(ordered, variant, card)


@dataclass(frozen=True)
class Criterion:
    group: str
    key: str
    title: str
    passed: bool
    ref: str


@dataclass(frozen=True)
class Scorecard:
    criteria: tuple[Criterion, ...]
    note: str = ACCOUNTING_LAYER_NOTE

    def group(self, name: str) -> tuple[Criterion, ...]:
        return tuple(c for c in self.criteria if c.group == name)

    def __getitem__(self, key: str) -> Criterion:
        for c in self.criteria:
            if c.key == key:
                return c
        raise KeyError(key)

    @property
    def is_tea(self) -> bool:
        return all(c.passed for c in self.group("operational"))

    @property
    def hardened(self) -> bool:
        return self.is_tea and all(c.passed for c in self.group("near-essential"))

    @property
    def verdict(self) -> str:
        if self.hardened:
            return "TEA (hardened)"
        return "TEA" if self.is_tea else "not TEA"


_ADDON_TITLES = {
    Addon.SETTLEMENT: "network-based settlement/payment",
    Addon.SMART_CONTRACTS: "smart contracts",
    Addon.RICARDIAN_CONTRACTS: "Ricardian contracts",
    Addon.DISTRIBUTED_LEDGER: "distributed ledger (more than one node)",
    Addon.STUB_STRUCTURE: "stub / shared entry / stub",
    Addon.GL_TRANSACTIONS: "general ledger for transactions",
    Addon.GL_REPORTING: "general ledger for reporting",
    Addon.VIEWING_PERMISSIONS: "viewing permissions",
}

_FURTHER_TITLES = {
    Further.SCALABILITY: "scalability and high throughput",
    Further.COMPLIANCE: "compliance with financial regulations",
    Further.AFFORDABILITY: "affordability",
    Further.USER_FRIENDLINESS: "user-friendliness",
}


def check_tea_criteria(profile: SystemProfile) -> Scorecard:
    p = profile
    crit = [
        Criterion(
            "operational", "shared_record", "shared transaction record (WYSIWIS)",
            p.is_transaction_record and p.shared_between_unrelated_parties, "operational criterion a",
        ),
        Criterion(
            "operational", "offer_acceptance_validation", "offer-acceptance-validation",
            p.has_three_signature_flow, "operational criterion b",
        ),
        Criterion(
            "operational", "accounting_layer", "ledger / accounting layer",
            p.has_accounting_layer, "operational criterion c",
        ),
        Criterion(
            "near-essential", "immutability", "immutability of transactions",
            p.immutable_record, "near-essential feature a",
        ),
        Criterion(
            "near-essential", "strong_identity", "strong digital identity verification",
            p.strong_identity, "near-essential feature b",
        ),
    ]
    for i, (addon, title) in enumerate(_ADDON_TITLES.items()):
        crit.append(
            Criterion("add-on", addon.value, title, addon in p.addons, f"add-on {'abcdefgh'[i]}")
        )
    for i, (feat, title) in enumerate(_FURTHER_TITLES.items()):
        crit.append(
            Criterion("further", feat.value, title, feat in p.further, f"further feature {'abcd'[i]}")
        )
    return Scorecard(tuple(crit))


# Named exemplars ---------------------------------------------------------------

@dataclass(frozen=True)
class Exemplar:
    key: str
    profile: SystemProfile
    relation: str
    note: str


@dataclass(frozen=True)
class ExemplarRow:
    key: str
    name: str
    labels: tuple[str, ...]
    verdict: str
    relation: str
    note: str


ENGINE_PROFILE = SystemProfile(
    name="triple-entry engine (this package)",
    book_kind=BookKind.LEDGER,
    shared_between_unrelated_parties=True,
    storage=Storage.DISTRIBUTED,
    sync_mechanism=Sync.CHANGE_REPLICATION,
    has_three_signature_flow=True,
    has_accounting_layer=True,
    immutable_record=True,
    strong_identity=True,
    addons=frozenset(
        {
            Addon.DISTRIBUTED_LEDGER,
            Addon.STUB_STRUCTURE,
            Addon.GL_TRANSACTIONS,
            Addon.GL_REPORTING,
            Addon.VIEWING_PERMISSIONS,
        }
    ),
)

EXEMPLARS: dict[str, Exemplar] = {
    e.key: e
    for e in [
        Exemplar(
            "bitcoin",
            SystemProfile(
                name="Bitcoin",
                book_kind=BookKind.JOURNAL,
                shared_between_unrelated_parties=True,
                storage=Storage.DISTRIBUTED,
                sync_mechanism=Sync.TRUSTLESS_VERIFICATION,
                block_structured=True,
                read_access=ReadAccess.OPEN,
                write_access=WriteAccess.PERMISSIONLESS,
                has_three_signature_flow=True,
                immutable_record=True,
                strong_identity=False,
                addons=frozenset({Addon.SETTLEMENT}),
            ),
            "TEB",
            "triple-entry bookkeeping on a distributed journal; no accounting layer",
        ),
        Exemplar(
            "boyle-str",
            SystemProfile(
                name="Shared Transaction Repository (Boyle)",
                book_kind=BookKind.JOURNAL,
                shared_between_unrelated_parties=True,
                storage=Storage.SINGLE_MACHINE,
                sync_mechanism=Sync.MASTER_DUPLICATION,
                has_three_signature_flow=True,
                immutable_record=True,
                strong_identity=True,
                addons=frozenset({Addon.STUB_STRUCTURE}),
            ),
            "TEB",
            "middleware server with an operator; no trustless verification",
        ),
        Exemplar(
            "ricardo",
            SystemProfile(
                name="Ricardo payment system (Grigg)",
                book_kind=BookKind.JOURNAL,
                shared_between_unrelated_parties=True,
                storage=Storage.SINGLE_MACHINE,
                has_three_signature_flow=True,
                immutable_record=True,
                strong_identity=True,
                addons=frozenset({Addon.SETTLEMENT, Addon.RICARDIAN_CONTRACTS}),
            ),
            "TEB",
            "signed receipts through an issuer server",
        ),
        Exemplar(
            "rea",
            SystemProfile(
                name="Resources, Events, Agents",
                book_kind=BookKind.LEDGER,
                shared_between_unrelated_parties=True,
                has_accounting_layer=True,
            ),
            "compatible",
            "single shared record ontology; can supplement triple-entry accounting",
        ),
        Exemplar(
            "momentum",
            SystemProfile(
                name="Momentum accounting",
                book_kind=BookKind.LEDGER,
                has_accounting_layer=True,
            ),
            "unrelated",
            "records the rate of change in income alongside wealth and income",
        ),
        Exemplar(
            "russian-triple",
            SystemProfile(
                name="Russian triple-entry (triple-book system)",
                book_kind=BookKind.LEDGER,
                has_accounting_layer=True,
            ),
            "unrelated",
            "three books: capital, systematic accounts, balance",
        ),
        Exemplar("engine", ENGINE_PROFILE, "TEA", "this package's own engine"),
    ]
}


def classify_named_exemplars() -> list[ExemplarRow]:
    rows = []
    for key, ex in EXEMPLARS.items():
        c = classify(ex.profile)
        rows.append(
            ExemplarRow(key, ex.profile.name, tuple(c.display_labels()), c.scorecard.verdict, ex.relation, ex.note)
        )
    return rows
