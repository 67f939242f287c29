"""Offer / acceptance / validation state machine producing triple-signed receipts.

Signatures nest: the payee countersigns the payer's signature bytes, and the
validator signs over both plus the previous receipt hash, so the order in
which the three parties agreed is itself non-repudiable.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

from .errors import (
    InvalidPriorSignature,
    InvariantViolation,
    MalformedKey,
    MalformedSignature,
    NotAParty,
    StubAlreadyPresent,
    WrongParty,
    WrongState,
)
from .identity import Identity, Registry, Signature, sign, verify

HASH_SCHEME = "sha256"
DIGEST_SIZE = 32
ENTRY_ID_SIZE = 16
MAX_MEMO_BYTES = 1024
MAX_STUB_BYTES = 4096
GENESIS_HASH = bytes(DIGEST_SIZE)

_U64 = struct.Struct(">Q")
_I64 = struct.Struct(">q")
_LEN = struct.Struct(">I")


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class State(str, enum.Enum):
    DRAFT = "draft"
    OFFERED = "offered"
    ACCEPTED = "accepted"
    VALIDATED = "validated"
    REJECTED = "rejected"


@dataclass(frozen=True)
class EntryCore:
    entry_id: bytes
    payer_alias: str
    payee_alias: str
    amount: int
    unit: str
    memo: str
    created_at: int

    def check(self) -> None:
        if not isinstance(self.entry_id, bytes) or len(self.entry_id) != ENTRY_ID_SIZE:
            raise InvariantViolation("entry_id must be 16 bytes")
        if not self.payer_alias or not self.payee_alias:
            raise InvariantViolation("payer and payee aliases must be non-empty")
        if self.payer_alias == self.payee_alias:
            raise InvariantViolation("payer and payee must differ")
        if type(self.amount) is not int or not 0 <= self.amount < 2**64:
            raise InvariantViolation("amount must be a non-negative integer in minor units")
        if not self.unit:
            raise InvariantViolation("unit must be non-empty")
        if len(self.memo.encode("utf-8")) > MAX_MEMO_BYTES:
            raise InvariantViolation("memo exceeds 1024 bytes")
        if type(self.created_at) is not int or not -(2**63) <= self.created_at < 2**63:
            raise InvariantViolation("created_at must be a 64-bit integer")

    def parties(self) -> tuple[str, str]:
        return (self.payer_alias, self.payee_alias)


def _field(data: bytes) -> bytes:
    return _LEN.pack(len(data)) + data


def canonical_encode(core: EntryCore) -> bytes:
    """Length-prefixed encoding of the core, the bytes every party signs."""
    core.check()
    return _encode_checked(core)


# Cores are frozen, and check() pins field types, so equal cores encode equally.
@lru_cache(maxsize=1 << 14)
def _encode_checked(core: EntryCore) -> bytes:
    return b"".join(
        _field(part)
        for part in (
            core.entry_id,
            core.payer_alias.encode("utf-8"),
            core.payee_alias.encode("utf-8"),
            _U64.pack(core.amount),
            core.unit.encode("utf-8"),
            core.memo.encode("utf-8"),
            _I64.pack(core.created_at),
        )
    )


def decode_core(data: bytes) -> EntryCore:
    """Inverse of :func:`canonical_encode`."""
    parts = []
    pos = 0
    try:
        for _ in range(7):
            (n,) = _LEN.unpack_from(data, pos)
            pos += _LEN.size
            if pos + n > len(data):
                raise InvariantViolation("truncated field")
            parts.append(data[pos : pos + n])
            pos += n
    except struct.error:
        raise InvariantViolation("truncated length prefix") from None
    if pos != len(data):
        raise InvariantViolation("trailing bytes after core")
    entry_id, payer, payee, amount, unit, memo, created = parts
    if len(amount) != 8 or len(created) != 8:
        raise InvariantViolation("integer fields must be 8 bytes")
    try:
        core = EntryCore(
            entry_id,
            payer.decode("utf-8"),
            payee.decode("utf-8"),
            _U64.unpack(amount)[0],
            unit.decode("utf-8"),
            memo.decode("utf-8"),
            _I64.unpack(created)[0],
        )
    except UnicodeDecodeError as exc:
        raise InvariantViolation(str(exc)) from None
    core.check()
    return core


def _encode_signature(sig: Optional[Signature]) -> bytes:
    if sig is None:
        return _field(b"")
    body = _field(sig.signer_alias.encode("utf-8")) + _field(sig.value) + _I64.pack(sig.signed_at)
    return _field(body)


@dataclass(frozen=True)
class SharedEntry:
    core: EntryCore
    state: State = State.DRAFT
    payer_sig: Optional[Signature] = None
    payee_sig: Optional[Signature] = None
    validator_sig: Optional[Signature] = None
    reason: str = ""

    @property
    def signatures(self) -> tuple[Signature, ...]:
        return tuple(s for s in (self.payer_sig, self.payee_sig, self.validator_sig) if s)

    def to_dict(self) -> dict:
        core = self.core
        return {
            "entry_id": core.entry_id.hex(),
            "payer": core.payer_alias,
            "payee": core.payee_alias,
            "amount": core.amount,
            "unit": core.unit,
            "memo": core.memo,
            "created_at": core.created_at,
            "state": self.state.value,
            "payer_sig": self.payer_sig.to_dict() if self.payer_sig else None,
            "payee_sig": self.payee_sig.to_dict() if self.payee_sig else None,
            "validator_sig": self.validator_sig.to_dict() if self.validator_sig else None,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SharedEntry":
        core = EntryCore(
            bytes.fromhex(data["entry_id"]),
            data["payer"],
            data["payee"],
            data["amount"],
            data["unit"],
            data["memo"],
            data["created_at"],
        )
        sig = lambda k: Signature.from_dict(data[k]) if data.get(k) else None  # noqa: E731
        return cls(
            core,
            State(data["state"]),
            sig("payer_sig"),
            sig("payee_sig"),
            sig("validator_sig"),
            data.get("reason", ""),
        )


def entry_preimage(entry: SharedEntry) -> bytes:
    """Core bytes followed by the three signature records; stubs never included."""
    return (
        canonical_encode(entry.core)
        + _encode_signature(entry.payer_sig)
        + _encode_signature(entry.payee_sig)
        + _encode_signature(entry.validator_sig)
    )


def receipt_digest(prev_hash: bytes, entry: SharedEntry) -> bytes:
    return digest(prev_hash + entry_preimage(entry))


@dataclass(frozen=True)
class Stub:
    owner_alias: str
    payload: bytes

    def to_dict(self) -> dict:
        return {"owner": self.owner_alias, "payload": self.payload.hex()}

    @classmethod
    def from_dict(cls, data: dict) -> "Stub":
        return cls(data["owner"], bytes.fromhex(data["payload"]))


@dataclass(frozen=True)
class ValidatedReceipt:
    entry: SharedEntry
    prev_hash: bytes
    receipt_hash: bytes
    seq: int
    stubs: tuple[Stub, ...] = field(default=(), compare=False)

    @property
    def core(self) -> EntryCore:
        return self.entry.core

    @property
    def entry_id(self) -> bytes:
        return self.entry.core.entry_id

    def stub_for(self, alias: str) -> Optional[Stub]:
        for stub in self.stubs:
            if stub.owner_alias == alias:
                return stub
        return None

    def to_dict(self) -> dict:
        data = self.entry.to_dict()
        del data["state"], data["reason"]
        data.update(
            seq=self.seq,
            prev_hash=self.prev_hash.hex(),
            receipt_hash=self.receipt_hash.hex(),
            stubs=[s.to_dict() for s in self.stubs],
        )
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ValidatedReceipt":
        entry = SharedEntry.from_dict({**data, "state": State.VALIDATED.value})
        return cls(
            entry,
            bytes.fromhex(data["prev_hash"]),
            bytes.fromhex(data["receipt_hash"]),
            data["seq"],
            tuple(Stub.from_dict(s) for s in data["stubs"]),
        )


def new_draft(
    entry_id: bytes,
    payer: str,
    payee: str,
    amount: int,
    unit: str,
    memo: str,
    created_at: int,
) -> SharedEntry:
    core = EntryCore(entry_id, payer, payee, amount, unit, memo, created_at)
    core.check()
    return SharedEntry(core)


def _payee_message(entry: SharedEntry) -> bytes:
    return canonical_encode(entry.core) + entry.payer_sig.value


def _validator_message(entry: SharedEntry, prev_hash: bytes) -> bytes:
    return (
        canonical_encode(entry.core)
        + entry.payer_sig.value
        + entry.payee_sig.value
        + prev_hash
    )


def _check(registry: Registry, alias: str, sig: Optional[Signature], message: bytes) -> bool:
    if sig is None or sig.signer_alias != alias:
        return False
    key = registry.resolve(alias)
    try:
        return verify(key, message, sig)
    except (MalformedSignature, MalformedKey):
        return False


def payer_sig_ok(entry: SharedEntry, registry: Registry) -> bool:
    return _check(registry, entry.core.payer_alias, entry.payer_sig, canonical_encode(entry.core))


def payee_sig_ok(entry: SharedEntry, registry: Registry) -> bool:
    if entry.payer_sig is None:
        return False
    return _check(registry, entry.core.payee_alias, entry.payee_sig, _payee_message(entry))


def offer(entry: SharedEntry, payer: Identity, at: int) -> SharedEntry:
    if entry.state is not State.DRAFT:
        raise WrongState(f"cannot offer an entry in state {entry.state.value}")
    if payer.alias != entry.core.payer_alias:
        raise WrongParty(f"{payer.alias!r} is not the payer")
    sig = sign(payer, canonical_encode(entry.core), at)
    return replace(entry, state=State.OFFERED, payer_sig=sig)


def accept(entry: SharedEntry, payee: Identity, at: int, registry: Registry) -> SharedEntry:
    if entry.state is not State.OFFERED:
        raise WrongState(f"cannot accept an entry in state {entry.state.value}")
    if payee.alias != entry.core.payee_alias:
        raise WrongParty(f"{payee.alias!r} is not the payee")
    if not payer_sig_ok(entry, registry):
        raise InvalidPriorSignature("payer signature does not verify")
    sig = sign(payee, _payee_message(entry), at)
    return replace(entry, state=State.ACCEPTED, payee_sig=sig)


def reject(entry: SharedEntry | ValidatedReceipt, payee: Identity, reason: str) -> SharedEntry:
    if isinstance(entry, ValidatedReceipt):
        entry = entry.entry
    if entry.state is not State.OFFERED:
        raise WrongState(f"cannot reject an entry in state {entry.state.value}")
    if payee.alias != entry.core.payee_alias:
        raise WrongParty(f"{payee.alias!r} is not the payee")
    return replace(entry, state=State.REJECTED, reason=reason)


def validate(
    entry: SharedEntry,
    validator: Identity,
    prev_hash: bytes,
    seq: int,
    at: int,
    registry: Registry,
) -> ValidatedReceipt:
    if entry.state is not State.ACCEPTED:
        raise WrongState(f"cannot validate an entry in state {entry.state.value}")
    if validator.alias in entry.core.parties():
        raise WrongParty("a party to the entry cannot validate it")
    if len(prev_hash) != DIGEST_SIZE:
        raise InvariantViolation("prev_hash must be 32 bytes")
    if type(seq) is not int or seq < 0:
        raise InvariantViolation("seq must be a non-negative integer")
    if not payer_sig_ok(entry, registry):
        raise InvalidPriorSignature("payer signature does not verify")
    if not payee_sig_ok(entry, registry):
        raise InvalidPriorSignature("payee signature does not verify")
    sig = sign(validator, _validator_message(entry, prev_hash), at)
    done = replace(entry, state=State.VALIDATED, validator_sig=sig)
    return ValidatedReceipt(done, bytes(prev_hash), receipt_digest(prev_hash, done), seq)


@dataclass(frozen=True)
class VerificationReport:
    payer_sig: bool
    payee_sig: bool
    validator_sig: bool
    hash: bool

    @property
    def passed(self) -> bool:
        return self.payer_sig and self.payee_sig and self.validator_sig and self.hash

    def __bool__(self) -> bool:
        return self.passed

    def failures(self) -> list[str]:
        return [
            name
            for name in ("payer_sig", "payee_sig", "validator_sig", "hash")
            if not getattr(self, name)
        ]


def verify_receipt(receipt: ValidatedReceipt, registry: Registry) -> VerificationReport:
    """Re-check all three signatures and the receipt hash.

    Aliases missing from the registry raise UnknownAlias.
    """
    entry = receipt.entry
    try:
        core_ok = True
        canonical_encode(entry.core)
    except InvariantViolation:
        core_ok = False
    for sig in entry.signatures:
        registry.resolve(sig.signer_alias)
    for alias in entry.core.parties():
        registry.resolve(alias)
    if not core_ok or entry.state is not State.VALIDATED or entry.payer_sig is None:
        return VerificationReport(False, False, False, False)

    payer = payer_sig_ok(entry, registry)
    payee = payee_sig_ok(entry, registry)
    vsig = entry.validator_sig
    validator = (
        vsig is not None
        and entry.payee_sig is not None
        and vsig.signer_alias not in entry.core.parties()
        and len(receipt.prev_hash) == DIGEST_SIZE
        and _check(registry, vsig.signer_alias, vsig, _validator_message(entry, receipt.prev_hash))
    )
    hash_ok = receipt_digest(receipt.prev_hash, entry) == receipt.receipt_hash
    return VerificationReport(payer, payee, bool(validator), hash_ok)


def attach_stub(receipt: ValidatedReceipt, stub: Stub) -> ValidatedReceipt:
    if stub.owner_alias not in receipt.core.parties():
        raise NotAParty(f"{stub.owner_alias!r} is not a party to the entry")
    if receipt.stub_for(stub.owner_alias) is not None:
        raise StubAlreadyPresent(stub.owner_alias)
    if len(stub.payload) > MAX_STUB_BYTES:
        raise InvariantViolation("stub payload exceeds 4096 bytes")
    stubs = tuple(sorted(receipt.stubs + (stub,), key=lambda s: s.owner_alias))
    return replace(receipt, stubs=stubs)
