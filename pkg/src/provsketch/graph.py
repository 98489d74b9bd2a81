"""Versioned provenance graph with causality-preserving duplicate elimination.

Edges always point along the flow of information. An event's
``(subject, action, object)`` triplet becomes ``subject -> object`` unless the
action is an inbound one (a read, a module load, ...), in which case the edge
is ``object -> subject``.

A node only ever receives new in-edges while it has no outgoing non-version
edges. When an in-edge would arrive at a node that already feeds other nodes,
a new version of the entity is created instead, linked from the old version by
a ``VERSION`` edge. Consequences relied on by the kernels:

* labels of a node that has out-edges never change again, so incremental
  histogram maintenance only has to look at the inserted edges;
* the graph is acyclic by construction (an edge only ever enters a sink).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .events import Event, EventVocab

log = logging.getLogger(__name__)

VERSION = "VERSION"
INBOUND_ACTIONS = frozenset({
    "READ", "LOAD", "RECV", "RECEIVE", "RECVFROM", "RECVMSG", "ACCEPT", "READ_SOCKET_PARAMS",
})


@dataclass(frozen=True, slots=True)
class NodeRef:
    entity_id: str
    version: int
    node_index: int
    label: int


@dataclass(slots=True)
class ProvEdge:
    src: int
    dst: int
    label: int
    first_seen: int
    last_seen: int
    seq: int = 0
    is_version_link: bool = False


@dataclass(slots=True)
class InsertOutcome:
    merged: bool = False
    delta_edges: list = field(default_factory=list)
    new_nodes: list = field(default_factory=list)
    dropped: bool = False

    @property
    def inserted(self) -> bool:
        return not self.merged and not self.dropped


@dataclass(frozen=True, slots=True)
class SnapshotMark:
    snapshot_id: int
    node_count: int
    edge_count: int
    timestamp: int


class ProvGraph:
    """Append-only edge list plus per-node in/out adjacency."""

    def __init__(self, vocab: EventVocab | None = None, inbound_actions=INBOUND_ACTIONS):
        self.vocab = vocab if vocab is not None else EventVocab()
        self.version_label = self.vocab.events.intern(VERSION)
        self.inbound_actions = frozenset(inbound_actions)
        self.nodes: list[NodeRef] = []
        self.edges: list[ProvEdge] = []
        self.in_edges: list[list[int]] = []
        self.out_edges: list[list[int]] = []
        self.out_flow: list[int] = []  # count of outgoing non-version edges
        self.prev_version: list[int] = []
        self.next_version: list[int] = []
        self.latest_version: dict[str, int] = {}
        self._latest_node: dict[str, int] = {}
        self._triplets: dict[tuple[int, int, int], int] = {}
        self.snapshot_id = 0
        self.raw_events = 0
        self.merged_events = 0
        self.dropped_self_loops = 0
        self.last_timestamp = 0

    # -- queries --------------------------------------------------------
    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_out_edges(self, v: int) -> bool:
        return self.out_flow[v] > 0

    def node_of(self, entity_id: str, version: int | None = None) -> int:
        """Dense index of an entity's latest (or given) version."""
        v = self._latest_node[entity_id]
        if version is None:
            return v
        while self.nodes[v].version > version:
            v = self.prev_version[v]
        if self.nodes[v].version != version:
            raise KeyError((entity_id, version))
        return v

    def flow_in_edges(self, v: int, transparent: bool = True) -> list[ProvEdge]:
        """Non-version in-edges seen by a backward walk from ``v``.

        With ``transparent`` set, walks pass through version links without
        consuming a hop, so the in-edges of all earlier versions count too.
        """
        out = []
        while v >= 0:
            for ei in self.in_edges[v]:
                e = self.edges[ei]
                if not e.is_version_link:
                    out.append(e)
            if not transparent:
                break
            v = self.prev_version[v]
        return out

    def node_name(self, v: int) -> str:
        n = self.nodes[v]
        return f"{n.entity_id}@{n.version}"

    # -- mutation -------------------------------------------------------
    def _new_node(self, entity_id: str, etype: str, version: int, prev: int) -> int:
        idx = len(self.nodes)
        self.nodes.append(NodeRef(entity_id, version, idx, self.vocab.entities.intern(etype)))
        self.in_edges.append([])
        self.out_edges.append([])
        self.out_flow.append(0)
        self.prev_version.append(prev)
        self.next_version.append(-1)
        if prev >= 0:
            self.next_version[prev] = idx
        self.latest_version[entity_id] = version
        self._latest_node[entity_id] = idx
        return idx

    def _add_edge(self, src, dst, label, ts, seq, version_link=False) -> int:
        ei = len(self.edges)
        self.edges.append(ProvEdge(src, dst, label, ts, ts, seq, version_link))
        self.in_edges[dst].append(ei)
        self.out_edges[src].append(ei)
        if not version_link:
            self.out_flow[src] += 1
            self._triplets[(src, label, dst)] = ei
        return ei

    def flow_endpoints(self, ev: Event):
        """(src_id, src_type, dst_id, dst_type) in information-flow direction."""
        if ev.action in self.inbound_actions:
            return ev.object_id, ev.object_type, ev.subject_id, ev.subject_type
        return ev.subject_id, ev.subject_type, ev.object_id, ev.object_type

    def insert_event(self, ev: Event) -> InsertOutcome:
        out = InsertOutcome()
        self.raw_events += 1
        self.last_timestamp = max(self.last_timestamp, ev.timestamp)
        src_id, src_t, dst_id, dst_t = self.flow_endpoints(ev)
        if src_id == dst_id:
            # reading and writing the same entity in one event cannot be walked
            self.dropped_self_loops += 1
            log.debug("dropping self-loop event seq=%s on %s", ev.seq, src_id)
            out.dropped = True
            return out
        label = self.vocab.events.intern(ev.action)

        src = self._latest_node.get(src_id)
        if src is None:
            src = self._new_node(src_id, src_t, 0, -1)
            out.new_nodes.append(src)
        dst = self._latest_node.get(dst_id)
        if dst is None:
            dst = self._new_node(dst_id, dst_t, 0, -1)
            out.new_nodes.append(dst)

        if self.out_flow[dst] == 0:
            ei = self._triplets.get((src, label, dst))
            if ei is not None:
                e = self.edges[ei]
                e.last_seen = max(e.last_seen, ev.timestamp)
                self.merged_events += 1
                out.merged = True
                return out
        else:
            old = dst
            node = self.nodes[old]
            dst = self._new_node(dst_id, dst_t, node.version + 1, old)
            out.new_nodes.append(dst)
            self._add_edge(old, dst, self.version_label, ev.timestamp, ev.seq, version_link=True)
            out.delta_edges.append((old, self.version_label, dst))
        self._add_edge(src, dst, label, ev.timestamp, ev.seq)
        out.delta_edges.append((src, label, dst))
        return out

    def snapshot(self) -> SnapshotMark:
        self.snapshot_id += 1
        return SnapshotMark(self.snapshot_id, self.node_count, self.edge_count, self.last_timestamp)

    def reduction_stats(self) -> dict:
        stored = sum(1 for e in self.edges if not e.is_version_link)
        entities = len(self._latest_node)
        return {
            "raw_events": self.raw_events,
            "merged_events": self.merged_events,
            "dropped_self_loops": self.dropped_self_loops,
            "versions_per_entity_mean": (len(self.nodes) / entities) if entities else 0.0,
            "edge_reduction_factor": (self.raw_events / stored) if stored else 1.0,
        }

    def dump_lines(self):
        for e in self.edges:
            yield "\t".join((self.node_name(e.src), self.vocab.events.name(e.label),
                             self.node_name(e.dst), str(e.first_seen), str(e.last_seen)))

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.dump_lines():
                fh.write(line + "\n")


def build_graph(events, vocab: EventVocab | None = None, **kw) -> ProvGraph:
    g = ProvGraph(vocab, **kw)
    for ev in events:
        g.insert_event(ev)
    return g
