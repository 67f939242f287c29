"""Answer the centralized / distributed / peer-to-peer questions separately.

Each is a different question about a network: who decides (a single
validator), whether nodes pass messages, and whether every node has the same
capabilities with no hubs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import networkx as nx

from .replication import Network, Role


@dataclass(frozen=True)
class TopologyReport:
    has_decision_center: bool
    spof_nodes: frozenset[str]
    is_distributed: bool
    is_p2p: bool
    is_pure_p2p: bool
    hub_nodes: frozenset[str]
    is_fully_decentralized: bool
    hub_threshold: float

    def to_dict(self) -> dict:
        return {
            "has_decision_center": self.has_decision_center,
            "spof_nodes": sorted(self.spof_nodes),
            "is_distributed": self.is_distributed,
            "is_p2p": self.is_p2p,
            "is_pure_p2p": self.is_pure_p2p,
            "hub_nodes": sorted(self.hub_nodes),
            "is_fully_decentralized": self.is_fully_decentralized,
            "hub_threshold": self.hub_threshold,
        }


def _spofs(graph: nx.Graph, validators: set[str], clients: set[str]) -> set[str]:
    """Nodes whose loss leaves some client unable to reach any validator."""
    spof = set()
    if len(validators) == 1:
        spof |= validators
    for cut in nx.articulation_points(graph):
        if cut in spof:
            continue
        g = graph.copy()
        g.remove_node(cut)
        live = validators - {cut}
        for client in clients - {cut}:
            if not live or not any(nx.has_path(g, client, v) for v in live):
                spof.add(cut)
                break
    return spof


def classify_topology(
    network: Network,
    hub_threshold: Optional[float] = None,
    hub_factor: Optional[float] = None,
) -> TopologyReport:
    """Hub threshold defaults to ``hub_factor`` (2.0) times the mean degree."""
    graph = network.topology
    roles = {nid: n.role for nid, n in network.nodes.items()}
    caps = {nid: n.capabilities for nid, n in network.nodes.items()}
    validators = {nid for nid, c in caps.items() if "validate" in c}
    clients = {nid for nid, c in caps.items() if "transact" in c}

    degrees = dict(graph.degree())
    mean = sum(degrees.values()) / len(degrees) if degrees else 0.0
    if hub_threshold is None:
        hub_threshold = network.scenario.hub_threshold
    if hub_threshold is None:
        factor = hub_factor if hub_factor is not None else network.scenario.hub_factor
        hub_threshold = factor * mean
    hubs = frozenset(nid for nid, d in degrees.items() if d > 0 and d >= hub_threshold)

    center = sum(r is Role.VALIDATOR for r in roles.values()) == 1
    spof = frozenset(_spofs(graph, validators, clients))
    distributed = len(graph) > 1 and graph.number_of_edges() > 0
    p2p = len(set(caps.values())) == 1 and all(r is Role.SERVENT for r in roles.values())
    return TopologyReport(
        has_decision_center=center,
        spof_nodes=spof,
        is_distributed=distributed,
        is_p2p=p2p,
        is_pure_p2p=p2p and not hubs,
        hub_nodes=hubs,
        is_fully_decentralized=not center and not hubs and not spof,
        hub_threshold=hub_threshold,
    )
