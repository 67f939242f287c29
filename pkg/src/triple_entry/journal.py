"""Append-only, hash-chained shared journal and its line-delimited file format.

File layout: one header line, then one canonical JSON object per receipt.
Every line must be byte-identical to the canonical re-serialization of what
it parses to, so any edit either changes a checked value or is rejected as
corrupt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from ._io import atomic_write, canonical_json
from .errors import (
    BadReceipt,
    ChainMismatch,
    CorruptFile,
    DuplicateEntryId,
    UnknownAlias,
)
from .identity import SCHEME as SIGNATURE_SCHEME
from .identity import Registry
from .protocol import (
    GENESIS_HASH,
    HASH_SCHEME,
    Stub,
    ValidatedReceipt,
    attach_stub,
    verify_receipt,
)

FORMAT_NAME = "triple-entry-journal"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Visibility:
    """``public`` or restricted to ``aliases`` (parties and validator always see)."""

    public: bool = False
    aliases: frozenset[str] = frozenset()

    def to_json(self):
        return "public" if self.public else sorted(self.aliases)

    @classmethod
    def from_json(cls, value) -> "Visibility":
        if value == "public":
            return cls(public=True)
        if isinstance(value, list) and all(isinstance(a, str) and a for a in value):
            if value != sorted(set(value)):
                raise ValueError("restricted alias list must be sorted and unique")
            return cls(aliases=frozenset(value))
        raise ValueError(f"bad visibility {value!r}")


PUBLIC = Visibility(public=True)
RESTRICTED = Visibility()


class SharedJournal:
    """Sequential record of validated receipts.

    ``append`` is the only mutator; there is no removal or reordering.
    """

    def __init__(self, validator_alias: str, registry: Registry):
        self.validator_alias = validator_alias
        self.registry = registry
        self.genesis_hash = GENESIS_HASH
        self._receipts: list[ValidatedReceipt] = []
        self._visibility: dict[bytes, Visibility] = {}
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self._receipts)

    def __iter__(self) -> Iterator[ValidatedReceipt]:
        return iter(tuple(self._receipts))

    def __getitem__(self, i: int) -> ValidatedReceipt:
        return self._receipts[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SharedJournal):
            return NotImplemented
        return (
            self.validator_alias == other.validator_alias
            and self._receipts == other._receipts
            and self._visibility == other._visibility
        )

    @property
    def receipts(self) -> tuple[ValidatedReceipt, ...]:
        return tuple(self._receipts)

    @property
    def head_hash(self) -> bytes:
        return self._receipts[-1].receipt_hash if self._receipts else self.genesis_hash

    def find(self, entry_id: bytes) -> Optional[ValidatedReceipt]:
        i = self._index.get(entry_id)
        return None if i is None else self._receipts[i]

    def visibility(self, entry_id: bytes) -> Visibility:
        return self._visibility.get(entry_id, RESTRICTED)

    def set_visibility(self, entry_id: bytes, visibility: Visibility) -> None:
        if entry_id not in self._index:
            raise KeyError(entry_id.hex())
        if visibility == RESTRICTED:
            self._visibility.pop(entry_id, None)
        else:
            self._visibility[entry_id] = visibility

    def append(self, receipt: ValidatedReceipt, visibility: Visibility | None = None) -> int:
        if receipt.entry_id in self._index:
            raise DuplicateEntryId(receipt.entry_id.hex())
        if receipt.prev_hash != self.head_hash or receipt.seq != len(self._receipts):
            raise ChainMismatch(
                f"receipt seq {receipt.seq} does not extend head at length {len(self)}"
            )
        vsig = receipt.entry.validator_sig
        if vsig is None or vsig.signer_alias != self.validator_alias:
            raise BadReceipt("receipt not signed by this journal's validator")
        try:
            report = verify_receipt(receipt, self.registry)
        except UnknownAlias as exc:
            raise BadReceipt(f"unknown alias {exc}") from None
        if not report.passed:
            raise BadReceipt("failed checks: " + ", ".join(report.failures()))
        return self._push(receipt, visibility)

    def _push(self, receipt: ValidatedReceipt, visibility: Visibility | None) -> int:
        self._index[receipt.entry_id] = len(self._receipts)
        self._receipts.append(receipt)
        if visibility is not None and visibility != RESTRICTED:
            self._visibility[receipt.entry_id] = visibility
        return receipt.seq

    def attach_stub(self, entry_id: bytes, stub: Stub) -> ValidatedReceipt:
        """Store a party's private stub beside a receipt; hashes are untouched."""
        i = self._index.get(entry_id)
        if i is None:
            raise KeyError(entry_id.hex())
        self._receipts[i] = attach_stub(self._receipts[i], stub)
        return self._receipts[i]

    def can_see(self, alias: str, receipt: ValidatedReceipt) -> bool:
        if alias in receipt.core.parties() or alias == self.validator_alias:
            return True
        vis = self.visibility(receipt.entry_id)
        return vis.public or alias in vis.aliases


def read_view(journal: SharedJournal, requester_alias: str) -> list[ValidatedReceipt]:
    if requester_alias not in journal.registry:
        raise UnknownAlias(requester_alias)
    return [r for r in journal._receipts if journal.can_see(requester_alias, r)]


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    length: int
    verified: int
    failed_index: Optional[int] = None
    check: Optional[str] = None
    detail: str = ""
    head_hash: bytes = GENESIS_HASH

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "length": self.length,
            "verified": self.verified,
            "failed_index": self.failed_index,
            "check": self.check,
            "detail": self.detail,
            "head_hash": self.head_hash.hex(),
        }

    def describe(self) -> str:
        if self.ok:
            return f"OK: {self.length} receipts, head {self.head_hash.hex()}"
        where = "" if self.failed_index is None else f" at index {self.failed_index}"
        return f"FAIL ({self.check}){where}: {self.detail}"


def _first_failure(journal: SharedJournal, registry: Registry):
    prev = journal.genesis_hash
    seen: set[bytes] = set()
    for i, r in enumerate(journal._receipts):
        if r.seq != i:
            return i, "seq", f"seq {r.seq} != position {i}"
        if r.prev_hash != prev:
            return i, "link", "prev_hash does not match previous receipt hash"
        if r.entry_id in seen:
            return i, "duplicate", f"entry id {r.entry_id.hex()} repeated"
        seen.add(r.entry_id)
        vsig = r.entry.validator_sig
        if vsig is None or vsig.signer_alias != journal.validator_alias:
            return i, "validator", "not signed by the journal validator"
        try:
            report = verify_receipt(r, registry)
        except UnknownAlias as exc:
            return i, "signature", f"unknown alias {exc}"
        if not (report.payer_sig and report.payee_sig and report.validator_sig):
            return i, "signature", "failed: " + ", ".join(report.failures())
        if not report.hash:
            return i, "hash", "receipt hash does not match contents"
        prev = r.receipt_hash
    return None


def verify_chain(
    journal: SharedJournal,
    registry: Registry,
    expected_length: Optional[int] = None,
    expected_head: Optional[bytes] = None,
) -> ChainReport:
    """Check seq, hash links, signatures and hashes; report the first failure.

    ``expected_length``/``expected_head`` come from a persisted header and
    catch truncation of an otherwise valid prefix.
    """
    n = len(journal)
    failure = _first_failure(journal, registry)
    if failure is not None:
        i, check, detail = failure
        return ChainReport(False, n, i, i, check, detail, journal.head_hash)
    if expected_length is not None and expected_length != n:
        return ChainReport(
            False, n, n, n, "length",
            f"header records {expected_length} receipts, found {n}", journal.head_hash,
        )
    if expected_head is not None and expected_head != journal.head_hash:
        return ChainReport(
            False, n, n, None, "head", "head hash differs from header", journal.head_hash
        )
    return ChainReport(True, n, n, head_hash=journal.head_hash)


def _header(journal: SharedJournal) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "hash": HASH_SCHEME,
        "signature": SIGNATURE_SCHEME,
        "validator": journal.validator_alias,
        "genesis": journal.genesis_hash.hex(),
        "length": len(journal),
        "head": journal.head_hash.hex(),
    }


def _record(journal: SharedJournal, receipt: ValidatedReceipt) -> dict:
    return _record_of(receipt, journal.visibility(receipt.entry_id))


def dumps(journal: SharedJournal) -> str:
    lines = [canonical_json(_header(journal))]
    lines += [canonical_json(_record(journal, r)) for r in journal._receipts]
    return "\n".join(lines) + "\n"


def persist(journal: SharedJournal, path: str | Path) -> None:
    atomic_write(path, dumps(journal))


def _parse_receipt(data: dict, offset: int) -> tuple[ValidatedReceipt, Visibility]:
    try:
        if not isinstance(data, dict):
            raise TypeError("record must be an object")
        vis = Visibility.from_json(data.pop("visibility"))
        receipt = ValidatedReceipt.from_dict(data)
        owners = [s.owner_alias for s in receipt.stubs]
        if owners != sorted(set(owners)):
            raise ValueError("stubs must be sorted by owner and unique")
        for owner in owners:
            if owner not in receipt.core.parties():
                raise ValueError(f"stub owner {owner!r} is not a party")
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CorruptFile(f"bad receipt record: {exc!r}", offset) from None
    return receipt, vis


def parse(raw: bytes, registry: Registry) -> tuple[dict | None, SharedJournal]:
    """Parse file bytes into (header, unverified journal). Raises CorruptFile."""
    if not raw:
        return None, SharedJournal("", registry)
    if not raw.endswith(b"\n"):
        raise CorruptFile("file must end with a newline", len(raw))
    header = None
    journal: SharedJournal | None = None
    offset = 0
    for line in raw[:-1].split(b"\n"):
        try:
            text = line.decode("utf-8")
            obj = json.loads(text)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptFile(f"unparseable line: {exc}", offset) from None
        if header is None:
            if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
                raise CorruptFile("missing journal header", offset)
            if (
                obj.get("version") != FORMAT_VERSION
                or obj.get("hash") != HASH_SCHEME
                or obj.get("signature") != SIGNATURE_SCHEME
                or obj.get("genesis") != GENESIS_HASH.hex()
                or not isinstance(obj.get("validator"), str)
                or type(obj.get("length")) is not int
                or not isinstance(obj.get("head"), str)
            ):
                raise CorruptFile("unsupported or malformed header", offset)
            if canonical_json(obj) != text:
                raise CorruptFile("non-canonical header", offset)
            header = obj
            journal = SharedJournal(obj["validator"], registry)
        else:
            receipt, vis = _parse_receipt(obj, offset)
            if canonical_json(_record_of(receipt, vis)) != text:
                raise CorruptFile("non-canonical receipt record", offset)
            journal._push(receipt, vis)
        offset += len(line) + 1
    return header, journal


def _record_of(receipt: ValidatedReceipt, vis: Visibility) -> dict:
    data = receipt.to_dict()
    data["visibility"] = vis.to_json()
    return data


def _expected(header: dict | None) -> tuple[Optional[int], Optional[bytes]]:
    if header is None:
        return None, None
    try:
        return header["length"], bytes.fromhex(header["head"])
    except ValueError:
        return header["length"], b""


def verify_bytes(raw: bytes, registry: Registry) -> ChainReport:
    """Verify persisted journal bytes; corruption becomes report content."""
    try:
        header, journal = parse(raw, registry)
    except CorruptFile as exc:
        return ChainReport(False, 0, 0, None, "corrupt", str(exc))
    length, head = _expected(header)
    return verify_chain(journal, registry, length, head)


def verify_file(path: str | Path, registry: Registry) -> ChainReport:
    return verify_bytes(Path(path).read_bytes(), registry)


def load(path: str | Path, registry: Registry) -> SharedJournal:
    """Read a journal file and re-verify the whole chain before returning it."""
    header, journal = parse(Path(path).read_bytes(), registry)
    length, head = _expected(header)
    report = verify_chain(journal, registry, length, head)
    if not report.ok:
        if report.check in ("signature", "hash", "validator", "duplicate"):
            raise BadReceipt(report.describe())
        raise ChainMismatch(report.describe())
    return journal
