import random

from hypothesis import given, settings
from hypothesis import strategies as st

from provsketch.authtrace import temporal_traverse
from provsketch.events import SessionEdge, parse_sessions, write_sessions
from provsketch.synth import fanout_sessions


def bfs_oracle(edges, seed_host, seed_user, t0, users=None):
    """Fixpoint over all edges until nothing improves; independent of the heap search."""
    hosts = {seed_host: t0}
    reached_users = {seed_user: t0} if seed_user else {}
    prop = [e for e in edges if e.kind in ("LOGIN", "RDP") and (users is None or e.user in users)]
    changed = True
    while changed:
        changed = False
        for e in prop:
            # host -> user when the session touches a reached host late enough
            for h in (e.dst_host, e.src_host):
                if h in hosts and e.timestamp >= hosts[h]:
                    if e.timestamp < reached_users.get(e.user, float("inf")):
                        reached_users[e.user] = e.timestamp
                        changed = True
            if e.user in reached_users and e.timestamp >= reached_users[e.user]:
                if e.timestamp < hosts.get(e.dst_host, float("inf")):
                    hosts[e.dst_host] = e.timestamp
                    changed = True
    return hosts, reached_users


def test_temporal_constraint():
    edges = [SessionEdge("u", "", "H1", "LOGIN", 5),
             SessionEdge("u", "H1", "H2", "RDP", 10),
             SessionEdge("u", "H1", "H3", "RDP", 3)]
    res = temporal_traverse(edges, "H1", "u", 5)
    assert res.flagged_hosts == {"H1", "H2"}


def test_alternating_closure():
    edges = [SessionEdge("u1", "", "H1", "LOGIN", 5),
             SessionEdge("u2", "", "H1", "LOGIN", 7),
             SessionEdge("u2", "", "H2", "LOGIN", 9)]
    res = temporal_traverse(edges, "H1", "u1", 5)
    assert "u2" in res.flagged_users and "H2" in res.flagged_hosts
    assert res.hosts["H2"] == 9 and res.users["u2"] == 7


def test_unknown_seed_host_gives_empty_result(caplog):
    res = temporal_traverse([SessionEdge("u", "", "H1", "LOGIN", 1)], "nowhere", "u", 0)
    assert not res.hosts and not res.users
    assert "does not appear" in caplog.text


def test_logout_does_not_propagate():
    edges = [SessionEdge("u", "", "H1", "LOGIN", 1), SessionEdge("v", "", "H1", "LOGOUT", 2),
             SessionEdge("v", "", "H9", "LOGIN", 3)]
    res = temporal_traverse(edges, "H1", "u", 1)
    assert "v" not in res.users and "H9" not in res.hosts


def test_user_filter():
    edges = [SessionEdge("admin", "", "H1", "LOGIN", 2), SessionEdge("admin", "H1", "H2", "RDP", 3),
             SessionEdge("bob", "", "H1", "LOGIN", 2), SessionEdge("bob", "H1", "H3", "RDP", 4)]
    res = temporal_traverse(edges, "H1", "", 1, users=["admin"])
    assert res.flagged_hosts == {"H1", "H2"} and res.flagged_users == {"admin"}


def test_fanout_fixture_matches_oracle(tmp_path):
    hosts = [f"SysClient{i:04d}" for i in range(16)]
    before = ["SysClient0900", "SysClient0901"]
    edges = fanout_sessions("zleazer", "SysClient0201", 1000, hosts, before)
    p = tmp_path / "s.jsonl"
    write_sessions(edges, p)
    edges = parse_sessions(p)
    res = temporal_traverse(edges, "SysClient0201", "zleazer", 1000)
    assert set(hosts) <= res.flagged_hosts
    assert not set(before) & res.flagged_hosts
    oh, ou = bfs_oracle(edges, "SysClient0201", "zleazer", 1000)
    assert res.hosts == oh and res.users == ou


def random_sessions(rng, n):
    users = [f"u{i}" for i in range(5)]
    hosts = [f"H{i}" for i in range(8)]
    out = []
    for _ in range(n):
        kind = rng.choice(("LOGIN", "RDP", "LOGOUT"))
        src = rng.choice(hosts) if kind == "RDP" else ""
        out.append(SessionEdge(rng.choice(users), src, rng.choice(hosts), kind, rng.randint(0, 30)))
    return out


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 40), st.integers(0, 30), st.booleans())
def test_matches_oracle_and_order_free(seed, n, t0, restrict):
    rng = random.Random(seed)
    edges = random_sessions(rng, n)
    users = ["u0", "u1"] if restrict else None
    seed_edge = edges[0]
    res = temporal_traverse(edges, seed_edge.dst_host, seed_edge.user, t0, users)
    oh, ou = bfs_oracle(edges, seed_edge.dst_host, seed_edge.user, t0, users)
    assert res.hosts == oh and res.users == ou
    shuffled = edges[:]
    rng.shuffle(shuffled)
    res2 = temporal_traverse(shuffled, seed_edge.dst_host, seed_edge.user, t0, users)
    assert res2.hosts == res.hosts and res2.users == res.users and res2.edges == res.edges
    for (src, dst, kind, ts) in res.edges:
        assert ts >= t0


def test_csv_outputs(tmp_path):
    edges = [SessionEdge("u", "", "H1", "LOGIN", 5), SessionEdge("u", "H1", "H2", "RDP", 10)]
    res = temporal_traverse(edges, "H1", "u", 5)
    res.write_edges_csv(tmp_path / "e.csv")
    res.write_flagged_csv(tmp_path / "f.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "src_entity,dst_entity,kind,timestamp"
    assert "H2,host,10" in (tmp_path / "f.csv").read_text()
