"""WL-subtree kernel with edge labels, and its temporally ordered (Unicorn-style) variant.

Iteration ``i`` relabels ``v`` from its previous label plus the multiset of
``(edge label, neighbor label)`` pairs over its in-edges. The WL variant sorts
the pairs; the temporal variant keeps them in edge arrival order
(``first_seen``, then ``seq``). A node gets a depth-``i`` label only when it
has a backward walk of length ``i``, mirroring the provenance kernel, so every
kernel counts the same nodes at every depth.

Without timestamps (``first_seen == 0`` everywhere) arrival order degrades to
event sequence order.
"""
from __future__ import annotations

from .labels import EMPTY, LabelHistogram, node_label_id, wl_label_id
from .prov import KernelDesync


def _pairs(g, edges, labels_prev, ordered: bool):
    evs = g.vocab.events
    if ordered:
        edges = sorted(edges, key=lambda e: (e.first_seen, e.seq))
        return [(evs.name(e.label), labels_prev[e.src]) for e in edges if labels_prev[e.src] != EMPTY]
    pairs = [(evs.name(e.label), labels_prev[e.src]) for e in edges if labels_prev[e.src] != EMPTY]
    pairs.sort()
    return pairs


class WLKernel:
    kind = "wl"
    ordered = False

    def __init__(self, h: int, vocab, transparent: bool = True):
        if h < 0:
            raise ValueError("h must be >= 0")
        self.h = h
        self.vocab = vocab
        self.transparent = transparent
        # labels[i][v]: one flat list per depth keeps neighbor lookups cheap
        self.labels: list[list[int]] = [[] for _ in range(h + 1)]
        self.histogram = LabelHistogram()
        self._cache: dict[tuple, int] = {}

    def _relabel(self, g, v: int, i: int) -> int:
        prev = self.labels[i - 1]
        pairs = _pairs(g, g.flow_in_edges(v, self.transparent), prev, self.ordered)
        if not pairs:
            return EMPTY
        key = (i, prev[v], tuple(pairs))
        lid = self._cache.get(key)
        if lid is None:
            lid = wl_label_id(i, prev[v], pairs)
            self._cache[key] = lid
        return lid

    def _downstream(self, g, v: int):
        for ei in g.out_edges[v]:
            e = g.edges[ei]
            if e.is_version_link:
                continue
            w = e.dst
            while w >= 0:
                yield w
                if not self.transparent:
                    break
                w = g.next_version[w]

    def _with_later_versions(self, g, v: int):
        yield v
        if self.transparent:
            w = g.next_version[v]
            while w >= 0:
                yield w
                w = g.next_version[w]

    def update(self, g, delta_edges, new_nodes) -> dict:
        hist = self.histogram
        change: dict[int, int] = {}

        def bump(lid, d, i):
            hist.add(lid, i, d)
            change[lid] = change.get(lid, 0) + d

        n0 = len(self.labels[0])
        for v in new_nodes:
            if v != len(self.labels[0]):
                raise KernelDesync(f"new node {v} out of order")
            lid = node_label_id(g.vocab.entities.name(g.nodes[v].label))
            self.labels[0].append(lid)
            for i in range(1, self.h + 1):
                self.labels[i].append(EMPTY)
            bump(lid, 1, 0)
        n = len(self.labels[0])

        seeds: dict[int, None] = {}
        for (u, _, v) in delta_edges:
            if u >= n or v >= n:
                raise KernelDesync(f"edge ({u}, {v}) references an uninitialized node")
            for w in self._with_later_versions(g, v):
                seeds[w] = None
        changed = set(range(n0, n))
        for i in range(1, self.h + 1):
            affected = dict(seeds)
            for u in sorted(changed):
                affected[u] = None
                for w in self._downstream(g, u):
                    affected[w] = None
            cur = self.labels[i]
            changed = set()
            for v in affected:
                new = self._relabel(g, v, i)
                old = cur[v]
                if new != old:
                    if old != EMPTY:
                        bump(old, -1, i)
                    if new != EMPTY:
                        bump(new, 1, i)
                    cur[v] = new
                    changed.add(v)
        return {k: d for k, d in change.items() if d}

    def apply(self, g, outcome) -> dict:
        return self.update(g, outcome.delta_edges, outcome.new_nodes)

    def label(self, v: int, i: int) -> int:
        return self.labels[i][v]


class UnicornKernel(WLKernel):
    kind = "unicorn"
    ordered = True


def wl_recompute_full(g, h: int, ordered: bool = False, transparent: bool = True) -> LabelHistogram:
    """Plain all-nodes-every-iteration WL refinement, used as the batch oracle."""
    hist = LabelHistogram()
    n = g.node_count
    prev = [node_label_id(g.vocab.entities.name(g.nodes[v].label)) for v in range(n)]
    for lid in prev:
        hist.add(lid, 0, 1)
    in_lists = [g.flow_in_edges(v, transparent) for v in range(n)]
    for i in range(1, h + 1):
        cur = []
        for v in range(n):
            pairs = _pairs(g, in_lists[v], prev, ordered)
            cur.append(wl_label_id(i, prev[v], pairs) if pairs else EMPTY)
        for lid in cur:
            if lid != EMPTY:
                hist.add(lid, i, 1)
        prev = cur
    return hist
