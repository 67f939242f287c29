"""Command-line interface over a workspace directory.

Workspace layout::

    workspace.json        validator alias, unit scales
    registry.tsv          alias<TAB>hex(public key)
    keys/<alias>.seed     hex signing seed (never copied into the journal)
    journal.jsonl         the shared journal
    drafts/<id>.json      entries still moving through offer/accept
    ledgers/<alias>.json  per-party general ledgers

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 state error.
Errors go to stderr as one JSON object ``{"error": CODE, "message": ...}``.
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import functools
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import accounting as acc
from . import journal as jr
from . import protocol as pr
from . import pta
from ._io import atomic_write, canonical_json
from .errors import (
    EXIT_OK,
    EXIT_STATE,
    EXIT_USAGE,
    EXIT_VERIFY,
    TripleEntryError,
    UnknownAlias,
)
from .identity import Identity, Registry, generate_identity
from .replication import build_network, load_scenario, run, wysiwis_check
from .topology import classify_topology
from .typology import check_tea_criteria, classify, classify_named_exemplars, load_profile


class UsageError(TripleEntryError):
    code = "USAGE"
    exit_code = EXIT_USAGE


class StateError(TripleEntryError):
    code = "STATE"
    exit_code = EXIT_STATE


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    config_path = property(lambda self: self.root / "workspace.json")
    registry_path = property(lambda self: self.root / "registry.tsv")
    journal_path = property(lambda self: self.root / "journal.jsonl")
    keys_dir = property(lambda self: self.root / "keys")
    drafts_dir = property(lambda self: self.root / "drafts")
    ledgers_dir = property(lambda self: self.root / "ledgers")

    def require(self) -> None:
        if not self.config_path.exists():
            raise StateError(f"{self.root} is not an initialized workspace")

    def config(self) -> dict:
        self.require()
        return json.loads(self.config_path.read_text(encoding="utf-8"))

    def registry(self) -> Registry:
        self.require()
        return Registry.load(self.registry_path)

    def identity(self, alias: str) -> Identity:
        path = self.keys_dir / f"{alias}.seed"
        if not path.exists():
            raise UnknownAlias(f"no signing key for {alias!r} in this workspace")
        return generate_identity(alias, bytes.fromhex(path.read_text().strip()))

    def journal(self, registry: Registry) -> jr.SharedJournal:
        j = jr.load(self.journal_path, registry)
        if not j.validator_alias:
            j.validator_alias = self.config()["validator"]
        return j

    def draft_path(self, entry_hex: str) -> Path:
        return self.drafts_dir / f"{entry_hex}.json"

    def read_draft(self, entry_hex: str) -> pr.SharedEntry:
        path = self.draft_path(entry_hex.lower())
        if not path.exists():
            raise StateError(f"no draft {entry_hex}")
        return pr.SharedEntry.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def write_draft(self, entry: pr.SharedEntry) -> None:
        atomic_write(self.draft_path(entry.core.entry_id.hex()), canonical_json(entry.to_dict()) + "\n")

    def ledger(self, alias: str, chart=None) -> acc.GeneralLedger:
        path = self.ledgers_dir / f"{alias}.json"
        if path.exists():
            return acc.GeneralLedger.from_dict(json.loads(path.read_text(encoding="utf-8")))
        return acc.GeneralLedger(alias, dict(chart) if chart else acc.default_chart())

    def write_ledger(self, gl: acc.GeneralLedger) -> None:
        atomic_write(self.ledgers_dir / f"{gl.owner_alias}.json", canonical_json(gl.to_dict()) + "\n")

    @contextlib.contextmanager
    def lock(self):
        self.require()
        with open(self.root / ".lock", "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


def _emit(args, data: Any, text: str) -> None:
    if args.format == "json":
        print(json.dumps(data, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def _hexid(value: str) -> str:
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise UsageError(f"bad entry id {value!r}") from None
    if len(raw) != pr.ENTRY_ID_SIZE:
        raise UsageError("entry id must be 16 bytes (32 hex digits)")
    return raw.hex()


# ---------------------------------------------------------------- commands --

def cmd_init(args) -> int:
    ws = Workspace(args.workspace)
    if ws.config_path.exists():
        raise StateError(f"{ws.root} is already initialized")
    ws.root.mkdir(parents=True, exist_ok=True)
    for d in (ws.keys_dir, ws.drafts_dir, ws.ledgers_dir):
        d.mkdir(exist_ok=True)
    atomic_write(ws.registry_path, "")
    atomic_write(ws.journal_path, jr.dumps(jr.SharedJournal(args.validator, Registry())))
    atomic_write(ws.config_path, canonical_json({"validator": args.validator, "scales": {}}) + "\n")
    _emit(args, {"workspace": str(ws.root), "validator": args.validator}, f"initialized {ws.root}")
    return EXIT_OK


def cmd_keygen(args) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        reg = ws.registry()
        try:
            seed = bytes.fromhex(args.seed)
        except ValueError:
            raise UsageError("seed must be hex") from None
        ident = generate_identity(args.alias, seed)
        reg.add(ident)
        atomic_write(ws.keys_dir / f"{args.alias}.seed", seed.hex() + "\n")
        atomic_write(ws.registry_path, reg.dumps())
    _emit(
        args,
        {"alias": ident.alias, "public_key": ident.public_key.hex()},
        f"{ident.alias}\t{ident.public_key.hex()}",
    )
    return EXIT_OK


def cmd_draft(args) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        ws.require()
        if args.id:
            entry_id = bytes.fromhex(_hexid(args.id))
        else:
            seed = canonical_json(
                [args.payer, args.payee, args.amount, args.unit, args.memo, args.now]
            ).encode("utf-8")
            entry_id = hashlib.sha256(b"draft" + seed).digest()[:16]
        entry = pr.new_draft(entry_id, args.payer, args.payee, args.amount, args.unit, args.memo, args.now)
        if ws.draft_path(entry_id.hex()).exists():
            raise StateError(f"draft {entry_id.hex()} already exists")
        ws.write_draft(entry)
    _emit(args, {"entry_id": entry_id.hex(), "state": entry.state.value}, entry_id.hex())
    return EXIT_OK


def _advance(args, step) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        reg = ws.registry()
        entry = ws.read_draft(_hexid(args.entry))
        new = step(ws, reg, entry)
        ws.write_draft(new)
    eid = new.core.entry_id.hex()
    _emit(args, {"entry_id": eid, "state": new.state.value}, f"{eid} {new.state.value}")
    return EXIT_OK


def cmd_offer(args) -> int:
    return _advance(args, lambda ws, reg, e: pr.offer(e, ws.identity(e.core.payer_alias), args.now))


def cmd_accept(args) -> int:
    return _advance(args, lambda ws, reg, e: pr.accept(e, ws.identity(e.core.payee_alias), args.now, reg))


def cmd_reject(args) -> int:
    return _advance(args, lambda ws, reg, e: pr.reject(e, ws.identity(e.core.payee_alias), args.reason))


def cmd_validate(args) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        reg = ws.registry()
        journal = ws.journal(reg)
        entry = ws.read_draft(_hexid(args.entry))
        validator = ws.identity(journal.validator_alias)
        receipt = pr.validate(entry, validator, journal.head_hash, len(journal), args.now, reg)
        vis = None
        if args.public:
            vis = jr.PUBLIC
        elif args.visible_to:
            vis = jr.Visibility(aliases=frozenset(a for a in args.visible_to.split(",") if a))
        journal.append(receipt, vis)
        jr.persist(journal, ws.journal_path)
        ws.draft_path(receipt.entry_id.hex()).unlink()
    _emit(
        args,
        {"entry_id": receipt.entry_id.hex(), "seq": receipt.seq, "receipt_hash": receipt.receipt_hash.hex()},
        f"{receipt.entry_id.hex()} validated seq={receipt.seq} hash={receipt.receipt_hash.hex()}",
    )
    return EXIT_OK


def cmd_stub(args) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        reg = ws.registry()
        journal = ws.journal(reg)
        eid = bytes.fromhex(_hexid(args.entry))
        if journal.find(eid) is None:
            raise StateError(f"no receipt {eid.hex()}")
        journal.attach_stub(eid, pr.Stub(args.as_alias, args.text.encode("utf-8")))
        jr.persist(journal, ws.journal_path)
    _emit(args, {"entry_id": eid.hex(), "owner": args.as_alias}, f"stub attached to {eid.hex()}")
    return EXIT_OK


def cmd_journal_verify(args) -> int:
    ws = Workspace(args.workspace)
    report = jr.verify_file(ws.journal_path, ws.registry())
    _emit(args, report.to_dict(), report.describe())
    return EXIT_OK if report.ok else EXIT_VERIFY


def _receipt_summary(r: pr.ValidatedReceipt) -> dict:
    c = r.core
    return {
        "seq": r.seq,
        "entry_id": c.entry_id.hex(),
        "payer": c.payer_alias,
        "payee": c.payee_alias,
        "amount": c.amount,
        "unit": c.unit,
        "memo": c.memo,
        "created_at": c.created_at,
        "receipt_hash": r.receipt_hash.hex(),
    }


def cmd_journal_view(args) -> int:
    ws = Workspace(args.workspace)
    reg = ws.registry()
    view = jr.read_view(ws.journal(reg), args.as_alias)
    rows = [_receipt_summary(r) for r in view]
    text = "\n".join(
        f"{r['seq']}\t{r['entry_id']}\t{r['payer']}->{r['payee']}\t{r['amount']} {r['unit']}\t{r['memo']}"
        for r in rows
    )
    _emit(args, {"as": args.as_alias, "receipts": rows}, text)
    return EXIT_OK


def cmd_post(args) -> int:
    ws = Workspace(args.workspace)
    mapping, chart = acc.load_mapping(args.mapping)
    with ws.lock():
        reg = ws.registry()
        if args.as_alias not in reg:
            raise UnknownAlias(args.as_alias)
        journal = ws.journal(reg)
        gl = ws.ledger(args.as_alias, chart)
        posted = acc.post_all(gl, journal, mapping)
        ws.write_ledger(gl)
    _emit(args, {"as": args.as_alias, "posted": posted}, f"posted {len(posted)} entries for {args.as_alias}")
    return EXIT_OK


def cmd_adjust(args) -> int:
    ws = Workspace(args.workspace)
    with ws.lock():
        gl = ws.ledger(args.as_alias)
        lines = [
            acc.PostingLine(args.debit, acc.Side.DEBIT, args.amount, "", args.unit),
            acc.PostingLine(args.credit, acc.Side.CREDIT, args.amount, "", args.unit),
        ]
        acc.adjust_glr(gl, lines, args.reason, at=args.now)
        ws.write_ledger(gl)
    adj = gl.glr[-1].source_id
    _emit(args, {"as": args.as_alias, "adjustment": adj}, f"{adj} recorded")
    return EXIT_OK


def _balance_rows(gl: acc.GeneralLedger, tb: dict[str, int]) -> list[dict]:
    return [
        {"code": code, "name": gl.chart[code].name, "balance": bal}
        for code, bal in tb.items()
    ]


def cmd_balance(args) -> int:
    ws = Workspace(args.workspace)
    ws.require()
    gl = ws.ledger(args.as_alias)
    tb = acc.trial_balance(gl, args.scope)
    debit, credit = acc.totals(tb)
    rows = _balance_rows(gl, tb)
    lines = [f"{r['code']}\t{r['name']}\t{r['balance']}" for r in rows if r["balance"]]
    lines.append(f"total debits {debit} = total credits {credit}")
    _emit(
        args,
        {"as": args.as_alias, "scope": args.scope, "accounts": rows, "debits": debit, "credits": credit},
        "\n".join(lines),
    )
    return EXIT_OK


def cmd_export_pta(args) -> int:
    ws = Workspace(args.workspace)
    gl = ws.ledger(args.as_alias)
    scales = ws.config().get("scales", {})
    text = pta.export_pta(gl, args.out, args.scope, scales)
    blocks = text.count("\n\n")
    _emit(args, {"as": args.as_alias, "out": args.out, "transactions": blocks}, f"wrote {blocks} transactions to {args.out}")
    return EXIT_OK


def cmd_redundancy(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    reports = [acc.count_redundancy(args.n, m) for m in acc.Mode]
    data = {
        r.mode.value: {"records": r.record_count, "signatures": r.signature_count} for r in reports
    }
    text = "\n".join(
        f"{r.mode.value}\t{r.record_count} records\t{r.signature_count} signatures" for r in reports
    )
    _emit(args, {"n": args.n, "modes": data}, text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    net = build_network(scenario, args.seed)
    trace = run(net, args.until)
    if args.out:
        atomic_write(args.out, trace.text())
    summary: dict[str, Any] = {
        "events": len(trace),
        "tamper_detected": [dict(e.details) for e in trace.of_kind("tamper_detected")],
    }
    if net.is_quiescent():
        w = wysiwis_check(net)
        summary.update(wysiwis=w.agree, honest_agree=w.honest_agree, heads=w.heads, divergent=list(w.divergent))
        text = f"{len(trace)} events; wysiwis={w.agree} honest_agree={w.honest_agree}"
    else:
        summary.update(wysiwis=None, in_flight=net.in_flight)
        text = f"{len(trace)} events; {net.in_flight} messages still in flight"
    if summary["tamper_detected"]:
        text += "\ntamper detected at: " + ", ".join(sorted({d["node"] for d in summary["tamper_detected"]}))
    _emit(args, summary, text)
    return EXIT_OK


def cmd_topology(args) -> int:
    net = build_network(load_scenario(args.scenario))
    report = classify_topology(net, hub_threshold=args.hub_threshold)
    d = report.to_dict()
    _emit(args, d, "\n".join(f"{k}: {v}" for k, v in d.items()))
    return EXIT_OK


def cmd_classify(args) -> int:
    path = args.profile or args.profile_file
    if not path:
        raise UsageError("classify needs a profile file")
    profile = load_profile(path)
    c = classify(profile)
    card = check_tea_criteria(profile)
    data = {
        "name": profile.name,
        "labels": c.display_labels(),
        "verdict": card.verdict,
        "criteria": [
            {"group": k.group, "key": k.key, "title": k.title, "passed": k.passed, "ref": k.ref}
            for k in card.criteria
        ],
        "note": card.note,
    }
    lines = [f"{profile.name}: {', '.join(data['labels']) or '(no labels)'}", f"verdict: {card.verdict}"]
    for k in card.criteria:
        lines.append(f"  [{'x' if k.passed else ' '}] {k.group}: {k.title} ({k.ref})")
    lines.append(f"note: {card.note}")
    _emit(args, data, "\n".join(lines))
    return EXIT_OK


def cmd_exemplars(args) -> int:
    rows = classify_named_exemplars()
    data = [
        {"key": r.key, "name": r.name, "labels": list(r.labels), "verdict": r.verdict,
         "relation": r.relation, "note": r.note}
        for r in rows
    ]
    text = "\n".join(f"{r.key}\t{r.relation}\t{r.verdict}\t{', '.join(r.labels)}" for r in rows)
    _emit(args, data, text)
    return EXIT_OK


# ------------------------------------------------------------------ parser --

@functools.lru_cache(maxsize=None)
def build_parser() -> argparse.ArgumentParser:
    """Built once per process; parse_args leaves the parser unchanged."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-w", "--workspace", default=".", help="workspace directory")
    common.add_argument("--format", choices=("text", "json"), default="text")

    p = argparse.ArgumentParser(prog="triple-entry", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(func=func)
        return sp

    sp = add("init", cmd_init, help="create a workspace")
    sp.add_argument("--validator", required=True, help="alias of the journal's validator")

    sp = add("keygen", cmd_keygen, help="derive and register an identity")
    sp.add_argument("--alias", required=True)
    sp.add_argument("--seed", required=True, help="32-byte seed as hex")

    sp = add("draft", cmd_draft, help="create a transaction draft")
    sp.add_argument("--payer", required=True)
    sp.add_argument("--payee", required=True)
    sp.add_argument("--amount", type=int, required=True, help="minor units")
    sp.add_argument("--unit", required=True)
    sp.add_argument("--memo", default="")
    sp.add_argument("--now", type=int, required=True, help="timestamp, ms since epoch")
    sp.add_argument("--id", help="explicit 16-byte entry id as hex")

    for name, func in (("offer", cmd_offer), ("accept", cmd_accept)):
        sp = add(name, func, help=f"{name} a draft")
        sp.add_argument("entry")
        sp.add_argument("--now", type=int, required=True)
    sp = add("reject", cmd_reject, help="reject an offered draft")
    sp.add_argument("entry")
    sp.add_argument("--reason", default="")
    sp = add("validate", cmd_validate, help="validate and append to the journal")
    sp.add_argument("entry")
    sp.add_argument("--now", type=int, required=True)
    vis = sp.add_mutually_exclusive_group()
    vis.add_argument("--public", action="store_true")
    vis.add_argument("--visible-to", help="comma-separated extra aliases")

    sp = add("stub", cmd_stub, help="attach a private stub to a receipt")
    sp.add_argument("entry")
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.add_argument("--text", required=True)

    jp = sub.add_parser("journal", help="journal inspection")
    jsub = jp.add_subparsers(dest="journal_command", required=True)
    sp = jsub.add_parser("verify", parents=[common])
    sp.set_defaults(func=cmd_journal_verify)
    sp = jsub.add_parser("view", parents=[common])
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.set_defaults(func=cmd_journal_view)

    sp = add("post", cmd_post, help="post visible receipts to a party's GLT")
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.add_argument("--mapping", required=True)

    sp = add("adjust", cmd_adjust, help="record a GLR adjustment")
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.add_argument("--debit", required=True)
    sp.add_argument("--credit", required=True)
    sp.add_argument("--amount", type=int, required=True)
    sp.add_argument("--unit", required=True)
    sp.add_argument("--reason", required=True)
    sp.add_argument("--now", type=int, required=True)

    sp = add("balance", cmd_balance, help="trial balance")
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.add_argument("--scope", choices=("glt", "all"), default="glt")

    sp = add("export-pta", cmd_export_pta, help="plain-text export")
    sp.add_argument("--as", dest="as_alias", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--scope", choices=("glt", "all"), default="all")

    sp = add("redundancy", cmd_redundancy, help="record counts per bookkeeping regime")
    sp.add_argument("--n", type=int, required=True)

    sp = add("simulate", cmd_simulate, help="run a replication scenario")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--until", type=int)

    sp = add("topology", cmd_topology, help="classify a scenario's topology")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--hub-threshold", type=float)

    sp = add("classify", cmd_classify, help="classify a system profile")
    sp.add_argument("profile_file", nargs="?")
    sp.add_argument("--profile")

    add("exemplars", cmd_exemplars, help="classify the built-in exemplars")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TripleEntryError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "IO_FAILURE", "message": str(exc)}), file=sys.stderr)
        return EXIT_STATE


if __name__ == "__main__":
    sys.exit(main())
