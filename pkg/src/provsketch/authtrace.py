"""Temporal forward traversal over the user-host session graph.

Starting from an anomaly's (host, user, time), a host reached at ``t`` flags
every user with a LOGIN/RDP session into or out of it at time ``>= t``, and a
user reached at ``t`` flags every host they log into at time ``>= t``.
First-reach times are earliest-arrival times, computed label-setting style.
LOGOUT records never propagate.
"""
from __future__ import annotations

import csv
import heapq
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

PROPAGATING = ("LOGIN", "RDP")


def host_node(name: str) -> str:
    return f"host:{name}"


def user_node(name: str) -> str:
    return f"user:{name}"


@dataclass
class TraceResult:
    seed_host: str
    seed_user: str
    t0: int
    hosts: dict[str, int] = field(default_factory=dict)
    users: dict[str, int] = field(default_factory=dict)
    edges: list[tuple[str, str, str, int]] = field(default_factory=list)

    @property
    def flagged_hosts(self) -> set[str]:
        return set(self.hosts)

    @property
    def flagged_users(self) -> set[str]:
        return set(self.users)

    def write_edges_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["src_entity", "dst_entity", "kind", "timestamp"])
            w.writerows(self.edges)

    def write_flagged_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["entity", "kind", "first_reach"])
            for h, t in sorted(self.hosts.items(), key=lambda x: (x[1], x[0])):
                w.writerow([h, "host", t])
            for u, t in sorted(self.users.items(), key=lambda x: (x[1], x[0])):
                w.writerow([u, "user", t])


def _adjacency(edges, users):
    """Directed arcs with timestamps: host->user (into/out of the host), user->dst host."""
    adj: dict[str, list[tuple[int, str, str]]] = {}
    for e in edges:
        if e.kind not in PROPAGATING:
            continue
        if users is not None and e.user not in users:
            continue
        u = user_node(e.user)
        for h in (e.dst_host, e.src_host):
            if h:
                adj.setdefault(host_node(h), []).append((e.timestamp, u, e.kind))
        adj.setdefault(u, []).append((e.timestamp, host_node(e.dst_host), e.kind))
    for arcs in adj.values():
        arcs.sort()
    return adj


def temporal_traverse(edges, seed_host: str, seed_user: str, t0: int, users=None) -> TraceResult:
    """Flag hosts and users reachable from the seed along non-decreasing timestamps >= t0.

    ``users`` optionally restricts which users' sessions may propagate.
    """
    edges = list(edges)
    res = TraceResult(seed_host, seed_user, t0)
    known = {e.dst_host for e in edges} | {e.src_host for e in edges if e.src_host}
    if seed_host not in known:
        log.warning("seed host %s does not appear in the session log", seed_host)
        return res
    allowed = set(users) if users is not None else None
    adj = _adjacency(edges, allowed)

    best: dict[str, int] = {host_node(seed_host): t0}
    seeds = [host_node(seed_host)]
    if seed_user:
        best[user_node(seed_user)] = t0
        seeds.append(user_node(seed_user))
    heap = [(t0, s) for s in sorted(seeds)]
    heapq.heapify(heap)
    done = set()
    while heap:
        t, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for (te, nxt, kind) in adj.get(node, ()):
            if te < t:
                continue
            if te < best.get(nxt, float("inf")):
                best[nxt] = te
                heapq.heappush(heap, (te, nxt))
    for node, t in best.items():
        kind, _, name = node.partition(":")
        (res.hosts if kind == "host" else res.users)[name] = t

    # every arc usable from a flagged endpoint, for rendering the movement graph
    seen = set()
    for node in sorted(best):
        for (te, nxt, kind) in adj.get(node, ()):
            if te >= best[node] and (node, nxt, kind, te) not in seen:
                seen.add((node, nxt, kind, te))
    res.edges = sorted(seen, key=lambda x: (x[3], x[0], x[1], x[2]))
    return res
