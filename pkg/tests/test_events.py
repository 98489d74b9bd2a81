import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provsketch.events import (Event, EventVocab, ParseError, ParseStats, SessionEdge, Vocabulary,
                               parse_jsonl, parse_sessions, parse_streamspot, partition,
                               read_events, write_events)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_streamspot_line_maps_fields(tmp_path):
    p = write(tmp_path, "g.tsv", "12\ta\t15\tf\tR\t0\n")
    vocab = EventVocab()
    [e] = parse_streamspot(p, vocab=vocab)
    assert (e.subject_id, e.subject_type, e.action, e.object_id, e.object_type, e.graph_id) == \
        ("12", "a", "R", "15", "f", "0")
    assert e.seq == 1 and e.timestamp == 0
    assert "a" in vocab.entities and "R" in vocab.events


def test_streamspot_empty_file(tmp_path):
    assert parse_streamspot(write(tmp_path, "e.tsv", "")) == []


def test_streamspot_malformed_aborts_by_default(tmp_path):
    p = write(tmp_path, "g.tsv", "1\ta\t2\tb\tW\t0\nbroken line\n")
    with pytest.raises(ParseError) as ei:
        parse_streamspot(p)
    assert ei.value.lineno == 2


def test_streamspot_lenient_skips_and_counts(tmp_path):
    p = write(tmp_path, "g.tsv", "1\ta\t2\tb\tW\t0\nbroken line\n")
    stats = ParseStats()
    evs = parse_streamspot(p, lenient=True, stats=stats)
    assert len(evs) == 1 and stats.skipped == 1 and stats.errors[0].lineno == 2


def test_jsonl_defaults(tmp_path):
    line = '{"subject_id":"p1","subject_type":"PROCESS","action":"READ","object_id":"f1","object_type":"FILE"}'
    [e] = parse_jsonl(write(tmp_path, "e.jsonl", line + "\n"))
    assert e.timestamp == 0 and e.host == "" and e.user == "" and e.graph_id == ""


def test_jsonl_orders_by_timestamp(tmp_path):
    base = {"subject_id": "p", "subject_type": "P", "action": "A", "object_id": "o", "object_type": "O"}
    lines = [json.dumps({**base, "timestamp": 5, "object_id": "late"}),
             json.dumps({**base, "timestamp": 3, "object_id": "early"})]
    evs = parse_jsonl(write(tmp_path, "e.jsonl", "\n".join(lines) + "\n"))
    assert [e.object_id for e in evs] == ["early", "late"]
    assert [e.seq for e in evs] == [1, 2]


def test_jsonl_missing_action_names_key_and_line(tmp_path):
    good = '{"subject_id":"p","subject_type":"P","action":"A","object_id":"o","object_type":"O"}'
    bad = '{"subject_id":"p","subject_type":"P","object_id":"o","object_type":"O"}'
    with pytest.raises(ParseError) as ei:
        parse_jsonl(write(tmp_path, "e.jsonl", good + "\n" + bad + "\n"))
    assert "action" in str(ei.value) and ei.value.lineno == 2


def test_jsonl_ignores_unknown_keys(tmp_path):
    line = '{"subject_id":"p","subject_type":"P","action":"A","object_id":"o","object_type":"O","x":1}'
    assert len(parse_jsonl(write(tmp_path, "e.jsonl", line))) == 1


def test_session_local_login(tmp_path):
    line = '{"user":"zleazer","src_host":"","dst_host":"Sysclient201","event":"LOGIN","timestamp":100}'
    [s] = parse_sessions(write(tmp_path, "s.jsonl", line))
    assert s == SessionEdge("zleazer", "", "Sysclient201", "LOGIN", 100)
    assert s.is_local


def test_session_empty_and_unknown_kind(tmp_path):
    assert parse_sessions(write(tmp_path, "e.jsonl", "")) == []
    line = '{"user":"u","src_host":"","dst_host":"H","event":"FOO","timestamp":1}'
    with pytest.raises(ParseError, match="unknown session event FOO"):
        parse_sessions(write(tmp_path, "s.jsonl", line))


def test_vocabulary_interning_is_injective():
    v = Vocabulary()
    a, b = v.intern("A"), v.intern("B")
    assert a != b and v.intern("A") == a and v.name(b) == "B"
    assert Vocabulary.from_json(v.to_json()) == v


def test_vocabulary_stable_across_parses(tmp_path):
    p = write(tmp_path, "g.tsv", "1\ta\t2\tb\tW\t0\n2\tb\t3\tc\tR\t0\n")
    v1, v2 = EventVocab(), EventVocab()
    parse_streamspot(p, vocab=v1)
    parse_streamspot(p, vocab=v2)
    assert v1 == v2 and v1.entities.items() == v2.entities.items()


def test_partition_by_graph_id_then_host():
    evs = [Event(1, 0, "a", "P", "W", "b", "F", host="h1", graph_id="g"),
           Event(2, 0, "a", "P", "W", "b", "F", host="h2")]
    assert set(partition(evs, "graph_id")) == {"g", "h2"}
    assert set(partition(evs, "host")) == {"h1", "h2"}


text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=8)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**12), text, text, text, text, text, text, text, text),
                max_size=20))
def test_canonical_round_trip(tmp_path_factory, rows):
    evs = [Event(i + 1, ts, *rest) for i, (ts, *rest) in enumerate(rows)]
    p = tmp_path_factory.mktemp("rt") / "ev.jsonl"
    write_events(evs, p, header="test header")
    assert read_events(p) == evs
