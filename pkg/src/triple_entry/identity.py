"""Ed25519 identities, signatures and the alias registry."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import (
    BadSeedLength,
    DuplicateAlias,
    EmptyAlias,
    MalformedKey,
    MalformedSignature,
    UnknownAlias,
)

SCHEME = "ed25519"
SEED_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64


@dataclass(frozen=True)
class Identity:
    alias: str
    public_key: bytes
    secret_key: bytes = field(repr=False, compare=False)


@dataclass(frozen=True)
class Signature:
    signer_alias: str
    value: bytes
    signed_at: int

    def to_dict(self) -> dict:
        return {
            "signer": self.signer_alias,
            "sig": self.value.hex(),
            "at": self.signed_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Signature":
        return cls(data["signer"], bytes.fromhex(data["sig"]), data["at"])


def generate_identity(alias: str, seed: bytes) -> Identity:
    """Derive an identity deterministically from a 32-byte seed."""
    if not alias:
        raise EmptyAlias("alias must be non-empty")
    if len(seed) != SEED_SIZE:
        raise BadSeedLength(f"seed must be {SEED_SIZE} bytes, got {len(seed)}")
    key = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    public = key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return Identity(alias, public, bytes(seed))


def _signed_bytes(message: bytes, at: int) -> bytes:
    # the timestamp is bound into what gets signed
    return message + struct.pack(">q", at)


def sign(identity: Identity, message: bytes, at: int) -> Signature:
    key = Ed25519PrivateKey.from_private_bytes(identity.secret_key)
    return Signature(identity.alias, key.sign(_signed_bytes(message, at)), at)


@lru_cache(maxsize=1 << 16)
def _verify_cached(public_key: bytes, payload: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(sig, payload)
    except InvalidSignature:
        return False
    return True


def verify(public_key: bytes, message: bytes, sig: Signature) -> bool:
    """True iff ``sig`` covers exactly ``message`` under ``public_key``.

    Structurally broken keys or signatures raise instead of returning False.
    """
    if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != PUBLIC_KEY_SIZE:
        raise MalformedKey("public key must be 32 bytes")
    if not isinstance(sig.value, (bytes, bytearray)) or len(sig.value) != SIGNATURE_SIZE:
        raise MalformedSignature("signature must be 64 bytes")
    try:
        Ed25519PublicKey.from_public_bytes(bytes(public_key))
    except ValueError as exc:
        raise MalformedKey(str(exc)) from None
    return _verify_cached(
        bytes(public_key), _signed_bytes(message, sig.signed_at), bytes(sig.value)
    )


class Registry:
    """Alias to public key map. Registration is single-writer."""

    def __init__(self, entries: Iterable[tuple[str, bytes]] = ()):
        self._keys: dict[str, bytes] = {}
        for alias, key in entries:
            self.register(alias, key)

    def register(self, alias: str, public_key: bytes) -> None:
        if not alias:
            raise EmptyAlias("alias must be non-empty")
        if "\t" in alias or "\n" in alias:
            raise EmptyAlias("alias may not contain tabs or newlines")
        if alias in self._keys:
            raise DuplicateAlias(alias)
        if len(public_key) != PUBLIC_KEY_SIZE:
            raise MalformedKey(f"public key for {alias!r} must be 32 bytes")
        self._keys[alias] = bytes(public_key)

    def add(self, identity: Identity) -> Identity:
        self.register(identity.alias, identity.public_key)
        return identity

    def resolve(self, alias: str) -> bytes:
        try:
            return self._keys[alias]
        except KeyError:
            raise UnknownAlias(alias) from None

    def __contains__(self, alias: object) -> bool:
        return alias in self._keys

    def __iter__(self) -> Iterator[str]:
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def items(self):
        return self._keys.items()

    def dumps(self) -> str:
        return "".join(f"{a}\t{k.hex()}\n" for a, k in self._keys.items())

    @classmethod
    def loads(cls, text: str) -> "Registry":
        reg = cls()
        for lineno, line in enumerate(text.split("\n"), 1):
            if not line:
                continue
            alias, sep, hexkey = line.partition("\t")
            if not sep:
                raise MalformedKey(f"registry line {lineno}: expected alias<TAB>key")
            try:
                key = bytes.fromhex(hexkey)
            except ValueError:
                raise MalformedKey(f"registry line {lineno}: bad hex") from None
            reg.register(alias, key)
        return reg

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
