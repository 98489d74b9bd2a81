"""Deterministic synthetic corpus shaped like StreamSpot.

Five benign task generators and one drive-by attack generator each emit
whole-run graphs in the StreamSpot TSV layout (edges already oriented along
information flow). A run is a root process forking ``workers`` children that
each replay the scenario's motif, with optional steps switched on at random.
The attack motif uses entity and event types the benign tasks never touch,
plus a short benign-looking browser prefix.

Entity type codes: a process, c file, f socket, g module, h config,
m memory, p pipe, x exploit buffer, y dropped binary, z kernel object.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

# (src role, src type, event, dst role, dst type, probability)
# roles: "w" = the worker, "r" = the run's root, "w2" = a per-worker child,
# "new*" = fresh entity, "s*" = run-wide shared entity
Motif = list[tuple[str, str, str, str, str, float]]

BENIGN: dict[str, Motif] = {
    "youtube": [
        ("new_sock", "f", "V", "w", "a", 1.0),
        ("w", "a", "W", "new_cache", "c", 1.0),
        ("s_codec", "g", "L", "w", "a", 1.0),
        ("w", "a", "M", "new_buf", "m", 0.5),
        ("w", "a", "S", "new_sock2", "f", 0.8),
        ("new_cache2", "c", "R", "w", "a", 0.6),
    ],
    "download": [
        ("new_sock", "f", "V", "w", "a", 1.0),
        ("w", "a", "W", "new_file", "c", 1.0),
        ("w", "a", "C", "new_file", "c", 0.6),
        ("s_libc", "g", "L", "w", "a", 1.0),
        ("new_tmp", "c", "R", "w", "a", 0.7),
        ("w", "a", "U", "new_tmp2", "c", 0.4),
    ],
    "cnn": [
        ("new_sock", "f", "V", "w", "a", 1.0),
        ("w", "a", "W", "new_cache", "c", 1.0),
        ("w", "a", "F", "w2", "a", 1.0),
        ("s_render", "g", "L", "w2", "a", 1.0),
        ("w2", "a", "S", "new_sock2", "f", 0.7),
        ("new_img", "c", "R", "w2", "a", 0.5),
    ],
    "gmail": [
        ("new_sock", "f", "V", "w", "a", 1.0),
        ("w", "a", "S", "new_sock2", "f", 1.0),
        ("s_cfg", "h", "R", "w", "a", 1.0),
        ("w", "a", "W", "new_cfg", "h", 0.4),
        ("s_tls", "g", "L", "w", "a", 0.9),
        ("new_att", "c", "R", "w", "a", 0.3),
    ],
    "vgame": [
        ("s_engine", "g", "L", "w", "a", 1.0),
        ("w", "a", "M", "new_buf", "m", 1.0),
        ("w", "a", "P", "new_pipe", "p", 1.0),
        ("new_pipe", "p", "R", "w2", "a", 0.8),
        ("new_save", "c", "R", "w", "a", 0.5),
        ("w", "a", "W", "new_save2", "c", 0.5),
    ],
}

ATTACK: Motif = [
    ("new_sock", "f", "V", "w", "a", 0.5),
    ("w", "a", "X", "new_exp", "x", 1.0),
    ("new_exp", "x", "Y", "w2", "a", 1.0),
    ("w2", "a", "Z", "new_drop", "y", 1.0),
    ("new_drop", "y", "K", "new_kobj", "z", 0.8),
    ("w2", "a", "Q", "new_c2", "f", 0.9),
    ("new_secret", "c", "E", "w2", "a", 0.7),
]

SCENARIOS = list(BENIGN) + ["attack"]


@dataclass
class SynthSpec:
    runs: int = 20
    workers: tuple[int, int] = (200, 220)
    scenarios: tuple[str, ...] = tuple(SCENARIOS)
    attack_browser_prefix: float = 0.1  # fraction of attack workers replaying a benign motif


def _motif_for(scenario: str):
    return ATTACK if scenario == "attack" else BENIGN[scenario]


def generate_run(scenario: str, run: int, seed: int, spec: SynthSpec | None = None):
    """Edges ``(src_id, src_type, dst_id, dst_type, event)`` of one run."""
    spec = spec or SynthSpec()
    rng = random.Random(f"{seed}:{scenario}:{run}")
    n_workers = rng.randint(*spec.workers)
    counter = 0

    def fresh(prefix):
        nonlocal counter
        counter += 1
        return f"{prefix}{counter}"

    root = fresh("proc")
    shared: dict[str, str] = {}
    edges = []
    for _ in range(n_workers):
        motif = _motif_for(scenario)
        spawn = "J" if scenario == "attack" else "F"
        if scenario == "attack" and rng.random() < spec.attack_browser_prefix:
            motif, spawn = BENIGN["cnn"], "F"
        w = fresh("proc")
        edges.append((root, "a", w, "a", spawn))
        local = {"w": w, "r": root}
        for (sr, st, ev, dr, dt, p) in motif:
            if p < 1.0 and rng.random() >= p:
                continue
            ids = []
            for role, typ in ((sr, st), (dr, dt)):
                if role in local:
                    ids.append(local[role])
                elif role.startswith("s_"):
                    ids.append(shared.setdefault(role, fresh(role[2:])))
                else:
                    local[role] = fresh(role.replace("new_", "") if role.startswith("new_") else role)
                    ids.append(local[role])
            edges.append((ids[0], st, ids[1], dt, ev))
    return edges


def write_streamspot(edges, graph_id: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (s, st, d, dt, ev) in edges:
            fh.write(f"{s}\t{st}\t{d}\t{dt}\t{ev}\t{graph_id}\n")


def synth_generate(out_dir, seed: int = 0, spec: SynthSpec | None = None) -> list[Path]:
    """Write one TSV per (scenario, run) plus ``labels.json`` and ``ground_truth.txt``."""
    spec = spec or SynthSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    labels = {}
    for scenario in spec.scenarios:
        for run in range(spec.runs):
            gid = f"{scenario}-{run:03d}"
            p = out / f"{gid}.tsv"
            write_streamspot(generate_run(scenario, run, seed, spec), gid, p)
            paths.append(p)
            labels[gid] = scenario
    (out / "labels.json").write_text(json.dumps(labels, indent=1, sort_keys=True) + "\n")
    with open(out / "ground_truth.txt", "w", encoding="utf-8") as fh:
        for gid, sc in sorted(labels.items()):
            if sc == "attack":
                fh.write(gid + "\n")
    return paths


def fanout_sessions(user: str, start_host: str, t0: int, hosts: list[str], before: list[str],
                    seed: int = 0):
    """Day-1 style session log: ``user`` lands on ``start_host`` at t0 and then fans out.

    Hosts in ``before`` are visited by the same user strictly before t0. A
    couple of unrelated users add background noise that never touches the
    compromised hosts after t0.
    """
    from .events import SessionEdge

    rng = random.Random(f"fanout:{seed}")
    edges = [SessionEdge(user, "", start_host, "LOGIN", t0)]
    for i, h in enumerate(before):
        edges.append(SessionEdge(user, "", h, "LOGIN", t0 - 10 - i))
    t = t0
    for h in hosts:
        t += rng.randint(1, 5)
        edges.append(SessionEdge(user, start_host, h, "RDP", t))
        edges.append(SessionEdge(user, start_host, h, "LOGOUT", t + 1))
    for j in range(3):
        other = f"bg{j}"
        edges.append(SessionEdge(other, "", f"Background{j:03d}", "LOGIN", t0 + j))
    edges.sort(key=lambda e: (e.timestamp, e.user, e.dst_host, e.kind))
    return edges
