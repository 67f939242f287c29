"""Deterministic discrete-event simulation of a replicated shared journal.

One validator node plays the shared transaction repository. Clients draft,
offer and accept entries; the validator signs off and floods the receipt;
every node keeps its own journal copy and appends only what it can verify.
Audit rounds exchange full journals between neighbours so that a node that
rewrote its local history is caught by the first honest peer it talks to.

Event ordering is (tick, edge id, sequence number). Nothing reads the wall
clock and all randomness flows from the scenario seed, so a scenario and a
seed fully determine the trace.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import json
import random
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

import networkx as nx
import yaml

from ._io import canonical_json
from .errors import (
    BadReceipt,
    ChainMismatch,
    DisconnectedTopology,
    DuplicateEntryId,
    IndexOutOfRange,
    NotQuiescent,
    ScenarioError,
    TripleEntryError,
)
from .identity import Identity, Registry, generate_identity
from .journal import SharedJournal
from .protocol import (
    GENESIS_HASH,
    SharedEntry,
    Stub,
    ValidatedReceipt,
    accept,
    entry_preimage,
    new_draft,
    offer,
    receipt_digest,
    validate,
)


class Role(str, enum.Enum):
    VALIDATOR = "validator"
    REPLICA = "replica"
    CLIENT = "client"
    SERVENT = "servent"  # peer that can act as client, replica and validator


CAPABILITIES = {
    Role.VALIDATOR: frozenset({"validate", "store"}),
    Role.REPLICA: frozenset({"store"}),
    Role.CLIENT: frozenset({"transact", "store"}),
    Role.SERVENT: frozenset({"validate", "transact", "store"}),
}


class Kind(str, enum.Enum):
    SUBMIT_DRAFT = "SubmitDraft"
    OFFER = "Offer"
    ACCEPT = "Accept"
    VALIDATED_BROADCAST = "ValidatedBroadcast"
    SYNC_REQUEST = "SyncRequest"
    SYNC_RESPONSE = "SyncResponse"


# ---------------------------------------------------------------- scenario --

@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: Role = Role.REPLICA
    honest: bool = True
    withhold: bool = False


@dataclass(frozen=True)
class Transfer:
    at: int
    payer: str
    payee: str
    amount: int
    unit: str = "USD"
    memo: str = ""


@dataclass(frozen=True)
class TamperSpec:
    at: int
    node: str
    index: int
    mutation: str = "amount"


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[tuple[str, str, int], ...]
    workload: tuple[Transfer, ...] = ()
    seed: int = 0
    audits: tuple[int, ...] = ()
    tampers: tuple[TamperSpec, ...] = ()
    hub_factor: float = 2.0
    hub_threshold: Optional[float] = None

    @classmethod
    def from_mapping(cls, data: dict) -> "Scenario":
        try:
            nodes = tuple(
                NodeSpec(
                    str(n["id"]),
                    Role(n.get("role", "replica")),
                    bool(n.get("honest", True)),
                    bool(n.get("withhold", False)),
                )
                for n in data["nodes"]
            )
            edges = []
            for e in data.get("edges", []):
                if isinstance(e, dict):
                    edges.append((str(e["a"]), str(e["b"]), int(e.get("latency", 1))))
                else:
                    a, b, *rest = e
                    edges.append((str(a), str(b), int(rest[0]) if rest else 1))
            workload = tuple(
                Transfer(
                    int(w["at"]), str(w["payer"]), str(w["payee"]), int(w["amount"]),
                    str(w.get("unit", "USD")), str(w.get("memo", "")),
                )
                for w in data.get("workload", [])
            )
            tampers = tuple(
                TamperSpec(int(t["at"]), str(t["node"]), int(t["index"]), str(t.get("mutation", "amount")))
                for t in data.get("tampers", [])
            )
            return cls(
                nodes,
                tuple(edges),
                workload,
                int(data.get("seed", 0)),
                tuple(int(a) for a in data.get("audits", [])),
                tampers,
                float(data.get("hub_factor", 2.0)),
                data.get("hub_threshold"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario: {exc!r}") from None

    def to_mapping(self) -> dict:
        out: dict[str, Any] = {
            "seed": self.seed,
            "hub_factor": self.hub_factor,
            "nodes": [
                {"id": n.node_id, "role": n.role.value, "honest": n.honest, "withhold": n.withhold}
                for n in self.nodes
            ],
            "edges": [[a, b, lat] for a, b, lat in self.edges],
            "workload": [
                {"at": w.at, "payer": w.payer, "payee": w.payee, "amount": w.amount,
                 "unit": w.unit, "memo": w.memo}
                for w in self.workload
            ],
            "audits": list(self.audits),
            "tampers": [
                {"at": t.at, "node": t.node, "index": t.index, "mutation": t.mutation}
                for t in self.tampers
            ],
        }
        if self.hub_threshold is not None:
            out["hub_threshold"] = self.hub_threshold
        return out


def load_scenario(path: str | Path) -> Scenario:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must be a mapping")
    return Scenario.from_mapping(data)


def random_scenario(n_nodes: int, n_transactions: int, seed: int) -> Scenario:
    """Random connected topology with one validator and a scripted workload."""
    rng = random.Random(seed)
    ids = [f"n{i:02d}" for i in range(n_nodes)]
    order = ids[:]
    rng.shuffle(order)
    validator = order[0]
    n_clients = max(2, n_nodes // 3)
    clients = set(order[1 : 1 + n_clients])
    nodes = tuple(
        NodeSpec(i, Role.VALIDATOR if i == validator else Role.CLIENT if i in clients else Role.REPLICA)
        for i in ids
    )
    edges: dict[frozenset, tuple[str, str, int]] = {}
    for k in range(1, n_nodes):
        a, b = order[k], order[rng.randrange(k)]
        edges[frozenset((a, b))] = (a, b, rng.randint(1, 3))
    for _ in range(rng.randint(0, n_nodes)):
        a, b = rng.sample(ids, 2)
        edges.setdefault(frozenset((a, b)), (a, b, rng.randint(1, 3)))
    client_list = sorted(clients)
    workload = []
    tick = 1
    for t in range(n_transactions):
        payer, payee = rng.sample(client_list, 2)
        workload.append(
            Transfer(tick, payer, payee, rng.randint(1, 100_000), "USD", f"sale: item {t}")
        )
        tick += rng.randint(0, 3)
    return Scenario(nodes, tuple(edges.values()), tuple(workload), seed)


# ----------------------------------------------------------------- network --

@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    kind: Kind
    payload: str
    deliver_at: int
    seq: int
    origin: str = ""
    target: str = ""


@dataclass
class Node:
    node_id: str
    role: Role
    identity: Identity
    local_journal: SharedJournal
    honest: bool = True
    withhold: bool = False
    pending: dict[int, ValidatedReceipt] = field(default_factory=dict)

    @property
    def capabilities(self) -> frozenset[str]:
        return CAPABILITIES[self.role]

    @property
    def head_hash(self) -> bytes:
        return self.local_journal.head_hash


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    details: tuple[tuple[str, Any], ...]

    def line(self) -> str:
        detail = " ".join(f"{k}={v}" for k, v in self.details)
        return f"{self.tick}\t{self.kind}\t{detail}"


class EventTrace(list):
    def lines(self) -> list[str]:
        return [e.line() for e in self]

    def text(self) -> str:
        return "".join(l + "\n" for l in self.lines())

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self if e.kind == kind]


def _derive(seed: int, *parts: str | int) -> bytes:
    h = hashlib.sha256(b"triple-entry-sim")
    h.update(seed.to_bytes(8, "big", signed=True))
    for p in parts:
        h.update(b"\x00" + str(p).encode("utf-8"))
    return h.digest()


class Network:
    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.rng_seed = seed
        self.clock = 0
        self.registry = Registry()
        self.topology = nx.Graph()
        self.latency: dict[frozenset, int] = {}
        self.nodes: dict[str, Node] = {}
        self.trace = EventTrace()
        self._queue: list[tuple[int, int, int, Message]] = []
        self._seq = 0
        self._controls: list[tuple[int, int, Callable[[], None]]] = []
        self._next_hop: dict[str, dict[str, str]] = {}
        self.edge_ids: dict[tuple[str, str], int] = {}
        self.validator_id = ""

    # -- construction helpers
    def _setup(self) -> None:
        sc = self.scenario
        for spec in sc.nodes:
            self.topology.add_node(spec.node_id)
        for a, b, lat in sc.edges:
            self.topology.add_edge(a, b)
            self.latency[frozenset((a, b))] = lat
        for i, (a, b) in enumerate(sorted(tuple(sorted(e)) for e in self.topology.edges)):
            self.edge_ids[(a, b)] = i
            self.edge_ids[(b, a)] = i

        validators = [s.node_id for s in sc.nodes if s.role is Role.VALIDATOR]
        servents = sorted(s.node_id for s in sc.nodes if s.role is Role.SERVENT)
        self.validator_id = validators[0] if validators else (servents[0] if servents else "")

        ids = {s.node_id: generate_identity(s.node_id, _derive(self.rng_seed, "key", s.node_id)) for s in sc.nodes}
        for ident in ids.values():
            self.registry.add(ident)
        for spec in sc.nodes:
            self.nodes[spec.node_id] = Node(
                spec.node_id,
                spec.role,
                ids[spec.node_id],
                SharedJournal(self.validator_id, self.registry),
                spec.honest,
                spec.withhold,
            )
            self._event(0, "setup_node", id=spec.node_id, role=spec.role.value, honest=spec.honest)
        for a, b in sorted(tuple(sorted(e)) for e in self.topology.edges):
            self._event(0, "setup_edge", a=a, b=b, latency=self.latency[frozenset((a, b))])

        for node_id in sorted(self.nodes):
            paths = nx.single_source_shortest_path(self._sorted_graph(), node_id)
            self._next_hop[node_id] = {t: p[1] for t, p in paths.items() if len(p) > 1}

        for i, w in enumerate(sc.workload):
            payload = canonical_json({"index": i})
            self._push(Message(w.payer, w.payer, Kind.SUBMIT_DRAFT, payload, w.at, 0, w.payer, w.payer))
        for at in sc.audits:
            schedule_audit(self, at)
        for t in sc.tampers:
            self._control(t.at, lambda t=t: inject_tamper(self, t.node, t.index, t.mutation))

    def _sorted_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.topology.nodes))
        g.add_edges_from(sorted(tuple(sorted(e)) for e in self.topology.edges))
        return g

    # -- queue
    def _push(self, msg: Message) -> None:
        self._seq += 1
        msg = replace(msg, seq=self._seq)
        edge = -1 if msg.src == msg.dst else self.edge_ids[(msg.src, msg.dst)]
        heapq.heappush(self._queue, (msg.deliver_at, edge, msg.seq, msg))

    def _control(self, at: int, action: Callable[[], None]) -> None:
        self._seq += 1
        self._controls.append((at, self._seq, action))
        self._controls.sort(key=lambda c: (c[0], c[1]))

    def send(self, src: str, dst: str, kind: Kind, payload: str, origin: str, target: str) -> None:
        if src == dst:
            lat = 0
        elif self.topology.has_edge(src, dst):
            lat = self.latency[frozenset((src, dst))]
        else:
            raise ValueError(f"no edge {src}-{dst}")
        self._push(Message(src, dst, kind, payload, self.clock + lat, 0, origin, target))

    def route(self, src: str, target: str, kind: Kind, payload: str, origin: str) -> bool:
        hop = target if src == target else self._next_hop.get(src, {}).get(target)
        if hop is None:
            self._event(self.clock, "drop", at=src, kind=kind.value, target=target, reason="unreachable")
            return False
        self.send(src, hop, kind, payload, origin, target)
        return True

    def _event(self, tick: int, kind: str, **details: Any) -> None:
        self.trace.append(Event(tick, kind, tuple(details.items())))

    @property
    def in_flight(self) -> int:
        return len(self._queue) + len(self._controls)

    def is_quiescent(self) -> bool:
        return not self._queue and not self._controls

    def inbox(self, node_id: str) -> list[Message]:
        return [m for *_k, m in sorted(self._queue) if m.dst == node_id]


def build_network(config: Scenario, seed: Optional[int] = None, strict: bool = False) -> Network:
    """Construct a network from a scenario. ``seed`` defaults to the scenario's."""
    seed = config.seed if seed is None else seed
    ids = [n.node_id for n in config.nodes]
    if len(ids) < 2:
        raise ScenarioError("a network needs at least two nodes")
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate node ids")
    known = set(ids)
    for a, b, lat in config.edges:
        if a not in known or b not in known or a == b:
            raise ScenarioError(f"bad edge {a}-{b}")
        if lat < 1:
            raise ScenarioError("latency must be >= 1 tick")
    if sum(n.role is Role.VALIDATOR for n in config.nodes) > 1:
        raise ScenarioError("exactly one validator per network in this model")
    net = Network(config, seed)
    net._setup()
    if not nx.is_connected(net.topology):
        msg = "topology is disconnected; convergence is not expected"
        if strict:
            raise DisconnectedTopology(msg)
        warnings.warn(msg, stacklevel=2)
    return net


# ---------------------------------------------------------------- handlers --

def _receipt_payload(receipt: ValidatedReceipt) -> dict:
    return receipt.to_dict()


def _same_record(a: ValidatedReceipt, b: ValidatedReceipt) -> bool:
    return (
        a.seq == b.seq
        and a.prev_hash == b.prev_hash
        and a.receipt_hash == b.receipt_hash
        and entry_preimage(a.entry) == entry_preimage(b.entry)
    )


def _append(net: Network, node: Node, receipt: ValidatedReceipt, src: str) -> bool:
    """Append ``receipt`` (and any buffered successors); True if anything was appended."""
    journal = node.local_journal
    try:
        journal.append(receipt)
    except (BadReceipt, ChainMismatch, DuplicateEntryId, TripleEntryError) as exc:
        if node.honest:
            net._event(net.clock, "tamper_detected", node=src, by=node.node_id, seq=receipt.seq, error=exc.code)
        return False
    net._event(net.clock, "append", node=node.node_id, seq=receipt.seq, source=src)
    _forward(net, node, receipt, exclude=src)
    while len(journal) in node.pending:
        nxt = node.pending.pop(len(journal))
        try:
            journal.append(nxt)
        except TripleEntryError as exc:
            net._event(net.clock, "protocol_error", node=node.node_id, seq=nxt.seq, error=exc.code)
            break
        net._event(net.clock, "append", node=node.node_id, seq=nxt.seq, source="buffer")
        _forward(net, node, nxt, exclude=src)
    return True


def _forward(net: Network, node: Node, receipt: ValidatedReceipt, exclude: str) -> None:
    if node.withhold:
        return
    payload = canonical_json(_receipt_payload(receipt))
    for nb in sorted(net.topology.neighbors(node.node_id)):
        if nb != exclude:
            net.send(node.node_id, nb, Kind.VALIDATED_BROADCAST, payload, node.node_id, nb)


def _on_submit(net: Network, node: Node, msg: Message) -> None:
    index = json.loads(msg.payload)["index"]
    w = net.scenario.workload[index]
    if "transact" not in node.capabilities:
        net._event(net.clock, "protocol_error", node=node.node_id, error="NOT_A_CLIENT", tx=index)
        return
    entry_id = _derive(net.rng_seed, "entry", index)[:16]
    try:
        draft = new_draft(entry_id, w.payer, w.payee, w.amount, w.unit, w.memo, net.clock)
        offered = offer(draft, node.identity, net.clock)
    except TripleEntryError as exc:
        net._event(net.clock, "protocol_error", node=node.node_id, error=exc.code, tx=index)
        return
    net._event(net.clock, "offer", entry=entry_id.hex(), payer=w.payer, payee=w.payee, amount=w.amount)
    net.route(node.node_id, w.payee, Kind.OFFER, canonical_json(offered.to_dict()), node.node_id)


def _on_offer(net: Network, node: Node, msg: Message) -> None:
    entry = SharedEntry.from_dict(json.loads(msg.payload))
    try:
        accepted = accept(entry, node.identity, net.clock, net.registry)
    except TripleEntryError as exc:
        net._event(net.clock, "protocol_error", node=node.node_id, error=exc.code, entry=entry.core.entry_id.hex())
        return
    net._event(net.clock, "accept", entry=entry.core.entry_id.hex(), payee=node.node_id)
    net.route(node.node_id, net.validator_id, Kind.ACCEPT, canonical_json(accepted.to_dict()), node.node_id)


def _on_accept(net: Network, node: Node, msg: Message) -> None:
    entry = SharedEntry.from_dict(json.loads(msg.payload))
    journal = node.local_journal
    if node.node_id != net.validator_id or "validate" not in node.capabilities:
        net._event(net.clock, "protocol_error", node=node.node_id, error="NOT_VALIDATOR")
        return
    if journal.find(entry.core.entry_id) is not None:
        net._event(net.clock, "protocol_error", node=node.node_id, error=DuplicateEntryId.code)
        return
    try:
        receipt = validate(entry, node.identity, journal.head_hash, len(journal), net.clock, net.registry)
        journal.append(receipt)
    except TripleEntryError as exc:
        net._event(net.clock, "protocol_error", node=node.node_id, error=exc.code, entry=entry.core.entry_id.hex())
        return
    net._event(net.clock, "validate", entry=entry.core.entry_id.hex(), seq=receipt.seq, head=receipt.receipt_hash.hex()[:16])
    _forward(net, node, receipt, exclude="")


def _on_broadcast(net: Network, node: Node, msg: Message) -> None:
    receipt = ValidatedReceipt.from_dict(json.loads(msg.payload))
    journal = node.local_journal
    if receipt.seq < len(journal):
        return
    if receipt.seq > len(journal):
        if receipt.seq not in node.pending:
            node.pending[receipt.seq] = receipt
            net._event(net.clock, "buffer", node=node.node_id, seq=receipt.seq, have=len(journal))
            net.send(node.node_id, msg.src, Kind.SYNC_REQUEST, canonical_json({"from": len(journal)}), node.node_id, msg.src)
        return
    _append(net, node, receipt, msg.src)


def _on_sync_request(net: Network, node: Node, msg: Message) -> None:
    start = json.loads(msg.payload)["from"]
    records = [_receipt_payload(r) for r in node.local_journal._receipts[start:]]
    net._event(net.clock, "sync_request", node=node.node_id, peer=msg.src, start=start, sent=len(records))
    net.send(node.node_id, msg.src, Kind.SYNC_RESPONSE, canonical_json({"receipts": records}), node.node_id, msg.src)


def _on_sync_response(net: Network, node: Node, msg: Message) -> None:
    records = json.loads(msg.payload)["receipts"]
    journal = node.local_journal
    added = 0
    for data in records:
        receipt = ValidatedReceipt.from_dict(data)
        if receipt.seq < len(journal):
            if not _same_record(receipt, journal[receipt.seq]):
                if node.honest:
                    net._event(net.clock, "tamper_detected", node=msg.src, by=node.node_id, seq=receipt.seq, error="DIVERGENT_HISTORY")
                return
            continue
        if receipt.seq > len(journal):
            break
        if not _append(net, node, receipt, msg.src):
            return
        added += 1
    net._event(net.clock, "sync_response", node=node.node_id, peer=msg.src, received=len(records), added=added)


_HANDLERS = {
    Kind.SUBMIT_DRAFT: _on_submit,
    Kind.OFFER: _on_offer,
    Kind.ACCEPT: _on_accept,
    Kind.VALIDATED_BROADCAST: _on_broadcast,
    Kind.SYNC_REQUEST: _on_sync_request,
    Kind.SYNC_RESPONSE: _on_sync_response,
}


def _deliver(net: Network, msg: Message) -> None:
    node = net.nodes[msg.dst]
    if msg.target and msg.target != node.node_id:
        # relay towards the final destination
        if node.withhold:
            net._event(net.clock, "drop", at=node.node_id, kind=msg.kind.value, reason="withheld")
            return
        net.route(node.node_id, msg.target, msg.kind, msg.payload, msg.origin)
        return
    _HANDLERS[msg.kind](net, node, msg)


def run(network: Network, until_tick: Optional[int] = None, max_events: int = 10_000_000) -> EventTrace:
    """Process every message with ``deliver_at <= until_tick`` (all, if None)."""
    processed = 0
    while network._queue or network._controls:
        next_msg = network._queue[0][0] if network._queue else None
        next_ctl = network._controls[0][0] if network._controls else None
        if next_ctl is not None and (next_msg is None or next_ctl <= next_msg):
            if until_tick is not None and next_ctl > until_tick:
                break
            at, _, action = network._controls.pop(0)
            network.clock = max(network.clock, at)
            action()
            continue
        if until_tick is not None and next_msg > until_tick:
            break
        tick, _, _, msg = heapq.heappop(network._queue)
        network.clock = max(network.clock, tick)
        _deliver(network, msg)
        processed += 1
        if processed >= max_events:
            raise RuntimeError("event budget exhausted")
    if until_tick is not None:
        network.clock = max(network.clock, until_tick)
    return network.trace


def schedule_audit(network: Network, at: Optional[int] = None) -> None:
    """Every honest node asks each neighbour for its whole journal at tick ``at``."""
    at = network.clock if at is None else at
    for node_id in sorted(network.nodes):
        node = network.nodes[node_id]
        if not node.honest:
            continue
        for nb in sorted(network.topology.neighbors(node_id)):
            lat = network.latency[frozenset((node_id, nb))]
            payload = canonical_json({"from": 0})
            network._push(Message(node_id, nb, Kind.SYNC_REQUEST, payload, at + lat, 0, node_id, nb))


# ------------------------------------------------------------------ checks --

def recomputed_head(journal: SharedJournal) -> bytes:
    """Head hash recomputed from contents, ignoring stored hashes and stubs."""
    h = GENESIS_HASH
    for r in journal._receipts:
        h = receipt_digest(h, r.entry)
    return h


def stored_hashes_consistent(journal: SharedJournal) -> bool:
    """True iff every stored prev/receipt hash matches its recomputation."""
    h = GENESIS_HASH
    for r in journal._receipts:
        if r.prev_hash != h:
            return False
        h = receipt_digest(h, r.entry)
        if r.receipt_hash != h:
            return False
    return True


@dataclass(frozen=True)
class WysiwisResult:
    agree: bool
    honest_agree: bool
    heads: dict[str, str]
    divergent: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.agree


def wysiwis_check(network: Network) -> WysiwisResult:
    """Compare every node's recomputed head hash.

    A node whose stored hashes disagree with its contents counts as divergent
    even when the recomputed head matches. ``agree`` covers all nodes;
    ``honest_agree`` only nodes still flagged honest.
    """
    if not network.is_quiescent():
        raise NotQuiescent(f"{network.in_flight} messages still in flight")
    heads = {nid: recomputed_head(n.local_journal).hex() for nid, n in sorted(network.nodes.items())}
    broken = {nid for nid, n in network.nodes.items() if not stored_hashes_consistent(n.local_journal)}
    honest_ids = {nid for nid, n in network.nodes.items() if n.honest}
    honest = {heads[nid] for nid in honest_ids}
    reference = network.nodes[network.validator_id] if network.validator_id else None
    ref_head = heads[reference.node_id] if reference and reference.honest else (min(honest) if honest else "")
    divergent = tuple(nid for nid, h in heads.items() if h != ref_head or nid in broken)
    return WysiwisResult(
        len(set(heads.values())) <= 1 and not broken,
        len(honest) <= 1 and not (broken & honest_ids),
        heads,
        divergent,
    )


MUTATIONS = ("amount", "memo", "payer_sig", "receipt_hash", "stub")


def _mutate(receipt: ValidatedReceipt, mutation: str) -> ValidatedReceipt:
    entry = receipt.entry
    core = entry.core
    if mutation == "amount":
        return replace(receipt, entry=replace(entry, core=replace(core, amount=core.amount + 1)))
    if mutation == "memo":
        return replace(receipt, entry=replace(entry, core=replace(core, memo=core.memo + "!")))
    if mutation == "payer_sig":
        sig = entry.payer_sig
        flipped = bytes([sig.value[0] ^ 1]) + sig.value[1:]
        return replace(receipt, entry=replace(entry, payer_sig=replace(sig, value=flipped)))
    if mutation == "receipt_hash":
        return replace(receipt, receipt_hash=bytes([receipt.receipt_hash[0] ^ 1]) + receipt.receipt_hash[1:])
    if mutation == "stub":
        owner = core.payer_alias
        old = receipt.stub_for(owner)
        payload = (old.payload if old else b"") + b"private note"
        others = tuple(s for s in receipt.stubs if s.owner_alias != owner)
        stubs = tuple(sorted(others + (Stub(owner, payload),), key=lambda s: s.owner_alias))
        return replace(receipt, stubs=stubs)
    raise ValueError(f"unknown mutation {mutation!r}; choose from {MUTATIONS}")


def inject_tamper(network: Network, node_id: str, receipt_index: int, mutation: str = "amount") -> None:
    """Rewrite one receipt in a node's local copy, leaving stored hashes alone.

    Any mutation other than a stub edit marks the node dishonest.
    """
    node = network.nodes[node_id]
    receipts = node.local_journal._receipts
    if not 0 <= receipt_index < len(receipts):
        raise IndexOutOfRange(f"{node_id} holds {len(receipts)} receipts")
    receipts[receipt_index] = _mutate(receipts[receipt_index], mutation)
    if mutation != "stub":
        node.honest = False
    network._event(network.clock, "tamper_injected", node=node_id, seq=receipt_index, mutation=mutation)


def run_scenario(scenario: Scenario, seed: Optional[int] = None, until_tick: Optional[int] = None) -> Network:
    net = build_network(scenario, seed)
    run(net, until_tick)
    return net
