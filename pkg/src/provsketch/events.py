"""Audit log parsing into a canonical, ordered event stream.

Three input formats are understood:

* StreamSpot TSV: ``src_id src_type dst_id dst_type edge_type graph_id``
* generic event JSONL (one object per line)
* user-session JSONL (logins, logouts, RDP) consumed by :mod:`provsketch.authtrace`

The canonical on-disk format is the generic JSONL, so parsed streams can be
concatenated and replayed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

MANDATORY_KEYS = ("subject_id", "subject_type", "action", "object_id", "object_type")
SESSION_KINDS = ("LOGIN", "LOGOUT", "RDP")


class ParseError(ValueError):
    """A recoverable per-line parse failure."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        self.message = message
        super().__init__(f"{path}:{lineno}: {message}")


class Vocabulary:
    """Injective name -> small integer interning table."""

    def __init__(self, names: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        return self._ids[name]

    def name(self, idx: int) -> str:
        return self._names[idx]

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._names == other._names

    def items(self):
        return list(self._ids.items())

    def to_json(self) -> list[str]:
        return list(self._names)

    @classmethod
    def from_json(cls, names) -> "Vocabulary":
        return cls(names)


@dataclass(frozen=True, slots=True)
class Event:
    seq: int
    timestamp: int
    subject_id: str
    subject_type: str
    action: str
    object_id: str
    object_type: str
    host: str = ""
    user: str = ""
    graph_id: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, slots=True)
class SessionEdge:
    user: str
    src_host: str
    dst_host: str
    kind: str
    timestamp: int

    @property
    def is_local(self) -> bool:
        return self.src_host == ""


class EventVocab:
    """The pair of type vocabularies populated while parsing."""

    def __init__(self, entities: Vocabulary | None = None, events: Vocabulary | None = None):
        self.entities = entities if entities is not None else Vocabulary()
        self.events = events if events is not None else Vocabulary()

    def register(self, ev: Event) -> None:
        self.entities.intern(ev.subject_type)
        self.entities.intern(ev.object_type)
        self.events.intern(ev.action)

    def to_json(self) -> dict:
        return {"entity_types": self.entities.to_json(), "event_types": self.events.to_json()}

    @classmethod
    def from_json(cls, d) -> "EventVocab":
        return cls(Vocabulary(d["entity_types"]), Vocabulary(d["event_types"]))

    def __eq__(self, other) -> bool:
        return (isinstance(other, EventVocab) and self.entities == other.entities
                and self.events == other.events)


class ParseStats:
    def __init__(self):
        self.lines = 0
        self.skipped = 0
        self.errors: list[ParseError] = []


def _handle(err: ParseError, lenient: bool, stats: ParseStats | None):
    if not lenient:
        raise err
    log.warning("skipping %s", err)
    if stats is not None:
        stats.skipped += 1
        stats.errors.append(err)


def _lines(path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line


def parse_streamspot(path, *, lenient=False, vocab: EventVocab | None = None,
                     stats: ParseStats | None = None) -> list[Event]:
    """Parse a StreamSpot edge file. Timestamps are absent, so ``seq`` is the line number."""
    events = []
    for lineno, line in _lines(path):
        if stats is not None:
            stats.lines += 1
        cols = line.split("\t")
        if len(cols) != 6 or not all(cols):
            _handle(ParseError(path, lineno, f"expected 6 tab-separated columns, got {len(cols)}"),
                    lenient, stats)
            continue
        src, src_t, dst, dst_t, etype, gid = cols
        ev = Event(seq=lineno, timestamp=0, subject_id=src, subject_type=src_t, action=etype,
                   object_id=dst, object_type=dst_t, graph_id=gid)
        if vocab is not None:
            vocab.register(ev)
        events.append(ev)
    return events


def _load_json(path, lineno, line):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError(path, lineno, "expected a JSON object")
    return obj


def parse_jsonl(path, *, lenient=False, vocab: EventVocab | None = None,
                stats: ParseStats | None = None) -> list[Event]:
    """Parse generic event JSONL, ordered by (timestamp, line number).

    Missing optional keys default to timestamp 0 and empty host/user/graph_id.
    The ``seq`` field is reassigned after sorting so it strictly increases.
    """
    rows = []
    for lineno, line in _lines(path):
        if stats is not None:
            stats.lines += 1
        try:
            obj = _load_json(path, lineno, line)
            for key in MANDATORY_KEYS:
                if key not in obj:
                    raise ParseError(path, lineno, f"missing key {key!r}")
            ts = obj.get("timestamp", 0)
            if ts is None:
                ts = 0
            if isinstance(ts, bool) or not isinstance(ts, (int, float)):
                raise ParseError(path, lineno, f"timestamp must be numeric, got {ts!r}")
        except ParseError as err:
            _handle(err, lenient, stats)
            continue
        rows.append((int(ts), lineno, obj))
    rows.sort(key=lambda r: (r[0], r[1]))
    events = []
    for seq, (ts, _, obj) in enumerate(rows, start=1):
        ev = Event(seq=seq, timestamp=ts,
                   subject_id=str(obj["subject_id"]), subject_type=str(obj["subject_type"]),
                   action=str(obj["action"]),
                   object_id=str(obj["object_id"]), object_type=str(obj["object_type"]),
                   host=str(obj.get("host") or ""), user=str(obj.get("user") or ""),
                   graph_id=str(obj.get("graph_id") or ""))
        if vocab is not None:
            vocab.register(ev)
        events.append(ev)
    return events


def read_events(path) -> list[Event]:
    """Re-read a canonical event file written by :func:`write_events`, keeping seq as stored.

    Lines starting with ``#`` are header comments.
    """
    events = []
    for lineno, line in _lines(path):
        if line.startswith("#"):
            continue
        obj = _load_json(path, lineno, line)
        try:
            events.append(Event(**obj))
        except TypeError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return events


def write_events(events: Iterable[Event], path, header: str | None = None) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for ev in events:
            fh.write(json.dumps(ev.to_dict(), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def parse_sessions(path, *, lenient=False, stats: ParseStats | None = None) -> list[SessionEdge]:
    """Parse user-session JSONL into a timestamp-ordered list of :class:`SessionEdge`."""
    rows = []
    for lineno, line in _lines(path):
        if stats is not None:
            stats.lines += 1
        try:
            obj = _load_json(path, lineno, line)
            for key in ("user", "dst_host", "event", "timestamp"):
                if key not in obj:
                    raise ParseError(path, lineno, f"missing key {key!r}")
            kind = str(obj["event"]).upper()
            if kind not in SESSION_KINDS:
                raise ParseError(path, lineno, f"unknown session event {obj['event']}")
            if not obj["dst_host"]:
                raise ParseError(path, lineno, "dst_host must be non-empty")
            ts = int(obj["timestamp"])
            if ts < 0:
                raise ParseError(path, lineno, "timestamp must be >= 0")
        except ParseError as err:
            _handle(err, lenient, stats)
            continue
        except (TypeError, ValueError):
            _handle(ParseError(path, lineno, f"bad timestamp {obj.get('timestamp')!r}"), lenient, stats)
            continue
        edge = SessionEdge(user=str(obj["user"]), src_host=str(obj.get("src_host") or ""),
                           dst_host=str(obj["dst_host"]), kind=kind, timestamp=ts)
        rows.append((ts, lineno, edge))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def write_sessions(edges: Iterable[SessionEdge], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in edges:
            fh.write(json.dumps({"user": e.user, "src_host": e.src_host, "dst_host": e.dst_host,
                                 "event": e.kind, "timestamp": e.timestamp}))
            fh.write("\n")


def partition_key(ev: Event, by: str = "graph_id") -> str:
    """Partition key for an event: ``graph_id`` if set (when asked for), else ``host``."""
    if by == "graph_id" and ev.graph_id:
        return ev.graph_id
    return ev.host


def partition(events: Iterable[Event], by: str = "graph_id") -> dict[str, list[Event]]:
    parts: dict[str, list[Event]] = {}
    for ev in events:
        parts.setdefault(partition_key(ev, by), []).append(ev)
    return parts


def load_events(path, fmt: str, **kw) -> list[Event]:
    fmt = fmt.lower()
    if fmt == "streamspot":
        return parse_streamspot(path, **kw)
    if fmt == "jsonl":
        return parse_jsonl(path, **kw)
    if fmt == "canonical":
        return read_events(path)
    raise ValueError(f"unknown event format {fmt!r}")


def iter_event_files(path) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        return sorted(x for x in p.iterdir() if x.is_file() and not x.name.startswith("."))
    return [p]
