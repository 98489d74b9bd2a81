import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from provsketch.events import Event, EventVocab  # noqa: E402
from provsketch.graph import ProvGraph  # noqa: E402

# criterion number -> (name, passed) collected by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record(num: int, name: str, status: str) -> None:
    ACCEPTANCE[num] = (name, status)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, status = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} {status:4s} {name}")


def ev(seq, subj, styp, action, obj, otyp, ts=None, **kw):
    return Event(seq=seq, timestamp=seq if ts is None else ts, subject_id=subj, subject_type=styp,
                 action=action, object_id=obj, object_type=otyp, **kw)


def graph_from(events, **kw):
    g = ProvGraph(EventVocab(), **kw)
    outs = [g.insert_event(e) for e in events]
    return g, outs


@pytest.fixture
def registry_events():
    """The small process/file/registry graph used throughout the kernel examples."""
    return [
        ev(1, "process1", "PROCESS", "CREATE", "process2", "PROCESS"),
        ev(2, "process2", "PROCESS", "READ", "file1", "FILE"),
        ev(3, "process1", "PROCESS", "CREATE", "process3", "PROCESS"),
        ev(4, "process2", "PROCESS", "EDIT", "registry1", "REGISTRY"),
    ]


def toy_graphs():
    """G1: module then file into p1. G2: file then module. G3: two files then module."""
    g1 = [ev(1, "p1", "PROCESS", "LOAD", "m1", "MODULE"),
          ev(2, "p1", "PROCESS", "READ", "f1", "FILE"),
          ev(3, "p1", "PROCESS", "EDIT", "r1", "REGISTRY")]
    g2 = [ev(1, "p1", "PROCESS", "READ", "f1", "FILE"),
          ev(2, "p1", "PROCESS", "LOAD", "m1", "MODULE"),
          ev(3, "p1", "PROCESS", "EDIT", "r1", "REGISTRY")]
    g3 = [ev(1, "p1", "PROCESS", "READ", "f1", "FILE"),
          ev(2, "p1", "PROCESS", "READ", "f2", "FILE"),
          ev(3, "p1", "PROCESS", "LOAD", "m1", "MODULE"),
          ev(4, "p1", "PROCESS", "EDIT", "r1", "REGISTRY")]
    return g1, g2, g3


ENTITY_TYPES = ("PROCESS", "FILE", "SOCKET", "REGISTRY")
ACTIONS = ("WRITE", "READ", "EXEC", "SEND", "RECV", "CREATE")


def random_events(rng: random.Random, n_events: int, n_entities: int = 12, same_ts: float = 0.0):
    """Random event stream over a fixed entity pool; each entity keeps one type."""
    types = {f"e{i}": rng.choice(ENTITY_TYPES) for i in range(n_entities)}
    ids = list(types)
    out, ts = [], 0
    for seq in range(1, n_events + 1):
        if rng.random() >= same_ts:
            ts += rng.randint(1, 3)
        s, o = rng.choice(ids), rng.choice(ids)
        out.append(Event(seq, ts, s, types[s], rng.choice(ACTIONS), o, types[o]))
    return out


def random_splits(rng: random.Random, n: int):
    """Cut points splitting range(n) into random consecutive batches."""
    cuts, i = [], 0
    while i < n:
        i += rng.randint(1, max(1, n // 4))
        cuts.append(min(i, n))
    return cuts
