"""Set-based provenance kernel: incremental histogram maintenance and a walk-enumeration oracle."""
from __future__ import annotations

from .labels import EMPTY, LabelCodec, LabelHistogram, node_label_id, prov_label_id


class KernelDesync(RuntimeError):
    """The kernel was handed an edge for a node it never initialized."""


class ProvKernel:
    """Incremental provenance label histogram.

    For every node ``v`` and depth ``i`` the kernel keeps the layer sets
    ``tau[v][i][j]`` (``j = 0..i``) as integer bitmasks over interned type ids;
    layer ``j = i`` holds the label of the edge nearest to ``v`` and layer 0 the
    types of the walk origins. ``psi[v][i]`` is the current label id, or 0 if
    ``v`` has no backward walk of length ``i``.
    """

    kind = "prov"

    def __init__(self, h: int, vocab, transparent: bool = True, debug: bool = False):
        if h < 0:
            raise ValueError("h must be >= 0")
        self.h = h
        self.transparent = transparent
        self.codec = LabelCodec(vocab, debug=debug)
        self.tau: list[list[list[int]]] = []
        self.psi: list[list[int]] = []
        self.histogram = LabelHistogram()

    def _init_node(self, g, v: int) -> int:
        if v != len(self.psi):
            raise KernelDesync(f"new node {v} out of order (kernel has {len(self.psi)})")
        h = self.h
        self.tau.append([[0] * (i + 1) for i in range(h + 1)])
        t = g.nodes[v].label
        self.tau[v][0][0] = 1 << t
        lid = node_label_id(g.vocab.entities.name(t))
        self.psi.append([lid] + [EMPTY] * h)
        return lid

    def update(self, g, delta_edges, new_nodes) -> dict:
        """Fold a batch of inserted edges into the histogram; returns the signed bin changes."""
        hist = self.histogram
        change: dict[int, int] = {}
        depth: dict[int, int] = {}

        def bump(lid, d, i):
            hist.add(lid, i, d)
            change[lid] = change.get(lid, 0) + d
            depth[lid] = i

        for v in new_nodes:
            bump(self._init_node(g, v), 1, 0)

        n = len(self.psi)
        flow, links = [], []
        for (u, lab, v) in delta_edges:
            if u >= n or v >= n:
                raise KernelDesync(f"edge ({u}, {v}) references an uninitialized node")
            if lab == g.version_label and g.prev_version[v] == u:
                if self.transparent:
                    links.append((u, v))
            else:
                flow.append((u, lab, v))
        links.sort(key=lambda e: e[1])

        tau, psi = self.tau, self.psi
        for i in range(1, self.h + 1):
            touched: dict[int, None] = {}
            for (u, lab, v) in flow:
                if psi[u][i - 1] == EMPTY:
                    continue
                tv = tau[v][i]
                tu = tau[u][i - 1]
                tv[i] |= 1 << lab
                for j in range(i):
                    tv[j] |= tu[j]
                touched[v] = None
            # a newer version sees its predecessor's walks without an extra hop
            for (p, v) in links:
                if tau[p][i][0] == 0:
                    continue
                tv = tau[v][i]
                tp = tau[p][i]
                for j in range(i + 1):
                    tv[j] |= tp[j]
                touched[v] = None
            for v in touched:
                new = self.codec.prov(tuple(reversed(tau[v][i])))
                old = psi[v][i]
                if new != old:
                    if old != EMPTY:
                        bump(old, -1, i)
                    bump(new, 1, i)
                    psi[v][i] = new
        return {k: d for k, d in change.items() if d}

    def apply(self, g, outcome) -> dict:
        return self.update(g, outcome.delta_edges, outcome.new_nodes)

    def label_layers(self, v: int, i: int) -> list[set[str]]:
        """Human-readable ``psi_i(v)`` as a list of name sets (empty list if no walk)."""
        masks = self.tau[v][i]
        if masks[0] == 0:
            return []
        out = []
        for j in range(i, -1, -1):
            out.append(set(self.codec._mask_names(masks[j], entity=(j == 0))))
        return out


def backward_walks(g, h: int, transparent: bool = True):
    """All distinct label-aware backward walks of length 0..h for every node.

    ``walks[i][v]`` is a set of tuples ``(l(e_0), ..., l(e_{i-1}), l(u))`` where
    ``e_0`` is the edge entering ``v``. Exponential in the worst case; meant as a
    test oracle and for small graphs.
    """
    ents, evs = g.vocab.entities, g.vocab.events
    n = g.node_count
    walks = [[{(ents.name(g.nodes[v].label),)} for v in range(n)]]
    in_lists = [g.flow_in_edges(v, transparent) for v in range(n)]
    for i in range(1, h + 1):
        prev = walks[i - 1]
        cur = []
        for v in range(n):
            s = set()
            for e in in_lists[v]:
                name = evs.name(e.label)
                for w in prev[e.src]:
                    s.add((name,) + w)
            cur.append(s)
        walks.append(cur)
    return walks


def prov_labels_from_walks(walk_set, i: int):
    """Group a walk set of length ``i`` into layers ``(tau^i, ..., tau^0)``."""
    if not walk_set:
        return None
    # tau^j = { l(e_{i-j}) }, so position p in the walk lands in layer j = i - p
    return [{w[p] for w in walk_set} for p in range(i + 1)]


def prov_recompute_full(g, h: int, transparent: bool = True) -> LabelHistogram:
    """Batch histogram built by enumerating backward walk sets directly."""
    hist = LabelHistogram()
    walks = backward_walks(g, h, transparent)
    for i in range(h + 1):
        for v in range(g.node_count):
            layers = prov_labels_from_walks(walks[i][v], i)
            if layers is not None:
                hist.add(prov_label_id(layers), i, 1)
    return hist
