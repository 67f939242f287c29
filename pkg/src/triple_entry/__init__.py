"""Triple-entry accounting engine.

Triple-signed receipts in a hash-chained shared journal, per-party general
ledgers fed from it, a replication simulator and a ledger-system classifier.
"""

from .identity import Identity, Registry, Signature, generate_identity, sign, verify
from .journal import SharedJournal, read_view, verify_chain
from .protocol import (
    EntryCore,
    SharedEntry,
    State,
    Stub,
    ValidatedReceipt,
    accept,
    attach_stub,
    canonical_encode,
    new_draft,
    offer,
    reject,
    validate,
    verify_receipt,
)

__version__ = "0.1.0"
