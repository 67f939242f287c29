"""Exception hierarchy.

Every error carries a stable machine-readable ``code`` (used by the CLI on
stderr) and an ``exit_code`` category.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_STATE = 3


class TripleEntryError(Exception):
    code = "ERROR"
    exit_code = EXIT_STATE


# identity
class EmptyAlias(TripleEntryError, ValueError):
    code = "EMPTY_ALIAS"
    exit_code = EXIT_USAGE


class BadSeedLength(TripleEntryError, ValueError):
    code = "BAD_SEED_LENGTH"
    exit_code = EXIT_USAGE


class MalformedKey(TripleEntryError, ValueError):
    code = "MALFORMED_KEY"
    exit_code = EXIT_VERIFY


class MalformedSignature(TripleEntryError, ValueError):
    code = "MALFORMED_SIGNATURE"
    exit_code = EXIT_VERIFY


class DuplicateAlias(TripleEntryError):
    code = "DUPLICATE_ALIAS"


class UnknownAlias(TripleEntryError, KeyError):
    code = "UNKNOWN_ALIAS"

    def __str__(self) -> str:
        return Exception.__str__(self)


# entry protocol
class InvariantViolation(TripleEntryError, ValueError):
    code = "INVARIANT_VIOLATION"
    exit_code = EXIT_USAGE


class WrongParty(TripleEntryError):
    code = "WRONG_PARTY"


class WrongState(TripleEntryError):
    code = "WRONG_STATE"


class InvalidPriorSignature(TripleEntryError):
    code = "INVALID_PRIOR_SIGNATURE"
    exit_code = EXIT_VERIFY


class NotAParty(TripleEntryError):
    code = "NOT_A_PARTY"


class StubAlreadyPresent(TripleEntryError):
    code = "STUB_ALREADY_PRESENT"


# shared journal
class ChainMismatch(TripleEntryError):
    code = "CHAIN_MISMATCH"
    exit_code = EXIT_VERIFY


class DuplicateEntryId(TripleEntryError):
    code = "DUPLICATE_ENTRY_ID"


class BadReceipt(TripleEntryError):
    code = "BAD_RECEIPT"
    exit_code = EXIT_VERIFY


class CorruptFile(TripleEntryError):
    code = "CORRUPT_FILE"
    exit_code = EXIT_VERIFY

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# accounting
class UnmappedAccount(TripleEntryError):
    code = "UNMAPPED_ACCOUNT"


class AlreadyPosted(TripleEntryError):
    code = "ALREADY_POSTED"


class Unbalanced(TripleEntryError, ValueError):
    code = "UNBALANCED"


class NotVisible(TripleEntryError):
    code = "NOT_VISIBLE"


class IoFailure(TripleEntryError, OSError):
    code = "IO_FAILURE"


# simulator
class DisconnectedTopology(TripleEntryError):
    code = "DISCONNECTED_TOPOLOGY"
    exit_code = EXIT_USAGE


class NotQuiescent(TripleEntryError):
    code = "NOT_QUIESCENT"


class IndexOutOfRange(TripleEntryError, IndexError):
    code = "INDEX_OUT_OF_RANGE"


class ScenarioError(TripleEntryError, ValueError):
    code = "BAD_SCENARIO"
    exit_code = EXIT_USAGE


# typology
class InconsistentProfile(TripleEntryError, ValueError):
    code = "INCONSISTENT_PROFILE"
    exit_code = EXIT_USAGE
