import pytest
from hypothesis import given, settings, strategies as st

from triple_entry.errors import (
    BadSeedLength,
    DuplicateAlias,
    EmptyAlias,
    MalformedKey,
    MalformedSignature,
    UnknownAlias,
)
from triple_entry.identity import Registry, Signature, generate_identity, sign, verify

SEED_A = bytes(range(32))
SEED_B = bytes(range(1, 33))


def test_generation_is_deterministic():
    assert generate_identity("alice", SEED_A).public_key == generate_identity("alice", SEED_A).public_key


def test_distinct_seeds_give_distinct_keys():
    assert generate_identity("alice", SEED_A).public_key != generate_identity("alice", SEED_B).public_key


def test_empty_alias_rejected():
    with pytest.raises(EmptyAlias):
        generate_identity("", SEED_A)


@pytest.mark.parametrize("n", [0, 31, 33])
def test_seed_length_enforced(n):
    with pytest.raises(BadSeedLength):
        generate_identity("alice", b"\x00" * n)


def test_secret_key_not_in_repr():
    ident = generate_identity("alice", SEED_A)
    assert SEED_A.hex() not in repr(ident)
    assert repr(SEED_A) not in repr(ident)


def test_sign_verify_roundtrip_and_forgery():
    alice = generate_identity("alice", SEED_A)
    bob = generate_identity("bob", SEED_B)
    sig = sign(alice, b"pay 100", 5)
    assert verify(alice.public_key, b"pay 100", sig)
    assert not verify(alice.public_key, b"pay 101", sig)
    assert not verify(bob.public_key, b"pay 100", sig)


def test_timestamp_is_covered():
    alice = generate_identity("alice", SEED_A)
    sig = sign(alice, b"m", 5)
    moved = Signature(sig.signer_alias, sig.value, 6)
    assert not verify(alice.public_key, b"m", moved)


def test_empty_message():
    alice = generate_identity("alice", SEED_A)
    assert verify(alice.public_key, b"", sign(alice, b"", 0))


def test_malformed_inputs_raise():
    alice = generate_identity("alice", SEED_A)
    sig = sign(alice, b"m", 0)
    with pytest.raises(MalformedSignature):
        verify(alice.public_key, b"m", Signature("alice", sig.value[:-1], 0))
    with pytest.raises(MalformedKey):
        verify(alice.public_key[:31], b"m", sig)


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=1, max_size=200), st.data())
def test_any_byte_flip_breaks_signature(message, data):
    alice = generate_identity("alice", SEED_A)
    sig = sign(alice, message, 42)
    i = data.draw(st.integers(0, len(message) - 1))
    bit = data.draw(st.integers(0, 7))
    mutated = bytearray(message)
    mutated[i] ^= 1 << bit
    assert verify(alice.public_key, message, sig)
    assert not verify(alice.public_key, bytes(mutated), sig)


def test_registry_roundtrip(tmp_path):
    reg = Registry()
    reg.add(generate_identity("alice", SEED_A))
    reg.add(generate_identity("bob", SEED_B))
    path = tmp_path / "registry.tsv"
    reg.save(path)
    raw = path.read_bytes()
    assert raw.count(b"\n") == 2 and b"\r" not in raw
    assert raw.split(b"\n")[0].split(b"\t")[0] == b"alice"
    again = Registry.load(path)
    assert dict(again.items()) == dict(reg.items())


def test_registry_rejects_duplicates_and_unknowns():
    reg = Registry()
    reg.add(generate_identity("alice", SEED_A))
    with pytest.raises(DuplicateAlias):
        reg.add(generate_identity("alice", SEED_B))
    with pytest.raises(UnknownAlias):
        reg.resolve("carol")
