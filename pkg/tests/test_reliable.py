from collections import Counter

import pytest
from hypothesis import given, strategies as st

from adaptsim.model import make_model
from adaptsim.model.base import serialize_state
from adaptsim.reliable import (
    DedupLedger,
    ReplicaManager,
    ReplicationConfigError,
    UnrecoverableEntityError,
    VseGroup,
    place_replicas,
    replicate_route,
)
from adaptsim.runtime import CrashSpec, Directory, EnvProfile
from adaptsim.sync import EngineConfigError, make_engine

from helpers import ev, oracle, run

GOSSIP = {"n": 200, "rumor_period": 10}
END = 100


def test_balanced_placement():
    groups = place_replicas(4, 2, 4)
    per_lp = Counter(lp for g in groups for lp, _ in g.replicas)
    assert sum(per_lp.values()) == 8
    assert set(per_lp.values()) == {2}


def test_too_many_replicas():
    with pytest.raises(ReplicationConfigError):
        place_replicas(4, 5, 4)
    with pytest.raises(ReplicationConfigError):
        place_replicas(4, 0, 4)


def test_single_replica_is_the_plain_placement():
    groups = place_replicas(10, 1, 3)
    assert [g.live_lps for g in groups] == [[e % 3] for e in range(10)]
    prim = [2, 0, 1, 1]
    assert [g.live_lps for g in place_replicas(4, 1, 3, primary=prim)] == [[p] for p in prim]


@given(n=st.integers(1, 60), L=st.integers(1, 8), data=st.data())
def test_placement_properties(n, L, data):
    r = data.draw(st.integers(1, L))
    groups = place_replicas(n, r, L)
    for g in groups:
        lps = g.live_lps
        assert len(lps) == r == len(set(lps))
    per_lp = Counter(lp for g in groups for lp in g.live_lps)
    counts = [per_lp.get(lp, 0) for lp in range(L)]
    assert max(counts) - min(counts) <= 1


def test_replica_lps_must_differ():
    with pytest.raises(ReplicationConfigError):
        VseGroup(0, [(1, 0), (1, 1)])


def test_route_to_every_live_replica():
    g = VseGroup(5, [(0, 0), (2, 1)])
    assert replicate_route(ev(3, 5), g) == [0, 2]
    g.mask(2)
    assert replicate_route(ev(3, 5), g) == [0]
    g.mask(0)
    with pytest.raises(UnrecoverableEntityError):
        replicate_route(ev(3, 5), g)


def test_dedup_accepts_first_copy_only():
    led = DedupLedger()
    k = ev(4, 1, 2, 7).key
    assert led.accept(k)
    assert not led.accept(k)
    assert led.drops == 1 and led.seen(k)
    assert led.accept(ev(4, 2, 2, 7).key)  # other target, other key
    led.prune(5)
    assert len(led) == 0 and not led.seen(k)


def test_dedup_copy_for_a_new_replica():
    a, b = DedupLedger(), DedupLedger()
    a.accept(ev(3, 1).key)
    a.accept(ev(3, 2).key)
    b.copy_entity(a, 1)
    assert b.seen(ev(3, 1).key) and not b.seen(ev(3, 2).key)


def test_crash_of_uninvolved_lp():
    mgr = ReplicaManager(place_replicas(4, 2, 4), 4)
    d = mgr.directory()
    hit = mgr.handle_lp_crash(0, d)
    # entity e lives on e and e+1 mod 4, so LP0 only holds 0 and 3
    assert sorted(hit) == [0, 3]
    assert d.homes[1] == [1, 2] and d.homes[2] == [2, 3]
    assert d.homes[0] == [1] and d.homes[3] == [3]
    assert mgr.min_live() == 1


def test_losing_every_replica_fails():
    mgr = ReplicaManager(place_replicas(4, 2, 4), 4)
    d = mgr.directory()
    mgr.handle_lp_crash(0, d)
    with pytest.raises(UnrecoverableEntityError):
        mgr.handle_lp_crash(1, d)


def test_re_replication_plan():
    mgr = ReplicaManager(place_replicas(4, 2, 4), 4, re_replication=True)
    d = mgr.directory()
    mgr.handle_lp_crash(0, d)
    plan = mgr.re_replication_plan([1, 2, 3], {1: 2, 2: 2, 3: 2})
    assert sorted(e for e, _, _ in plan) == [0, 3]
    for e, src, dst in plan:
        assert src in d.homes[e] and dst not in d.homes[e] and dst != 0
    assert mgr.min_live() == 2
    assert ReplicaManager(place_replicas(4, 2, 4), 4).re_replication_plan([1], {}) == []


# -- whole runs --------------------------------------------------------------

def _base():
    return run("timestepped", "gossip", GOSSIP, END, 4)


def _crash_profile(*crashes):
    return EnvProfile([1000.0] * 4, crashes=[CrashSpec(lp, t) for lp, t in crashes])


def test_replicas_without_crash_match_the_oracle():
    r = run("timestepped", "gossip", GOSSIP, END, 4, replicas=2)
    assert r.trace_text() == oracle("gossip", GOSSIP, END)
    c = r.report.counters
    assert c.dedup_drops > 0
    assert r.report.replication_overhead_ratio > 1.0
    # every replica in the 2-group sends once, one of the two copies survives
    assert c.remote_messages + c.local_messages - c.dedup_drops == c.dedup_drops


def test_crash_is_masked_with_two_replicas():
    base = _base()
    r = run("timestepped", "gossip", GOSSIP, END, 4, replicas=2, profile=_crash_profile((1, base.report.wct / 2)))
    assert r.ok, r.report.failure
    assert r.trace_text() == base.trace_text()
    assert r.report.live_replicas[-1][1] < 400


def test_crash_without_replicas_fails_cleanly():
    base = _base()
    r = run("timestepped", "gossip", GOSSIP, END, 4, profile=_crash_profile((1, base.report.wct / 2)))
    assert not r.ok and r.report.status == "failed"
    assert "LP1" in r.report.failure


def test_two_crashes_survive_with_re_replication():
    base = _base()
    w = base.report.wct
    prof = _crash_profile((1, w / 3), (2, 2 * w / 3))
    plain = run("timestepped", "gossip", GOSSIP, END, 4, replicas=2, profile=prof)
    assert not plain.ok  # LP1 and LP2 share the replicas of entities 1, 5, 9, ...
    healed = run("timestepped", "gossip", GOSSIP, END, 4, replicas=2, re_replication=True, profile=prof)
    assert healed.ok, healed.report.failure
    assert healed.trace_text() == base.trace_text()
    counts = [n for _, n in healed.report.live_replicas]
    assert min(counts) < 400 and counts[-1] == 400


def test_live_replicas_hold_identical_states():
    m = make_model("gossip", GOSSIP)
    e = make_engine("timestepped", m, end_time=END, n_lps=4, replicas=3)
    r = e.run()
    assert r.ok
    for eid, homes in enumerate(r.directory.homes):
        blobs = {serialize_state(e.lps[lp].states[eid]) for lp in homes}
        assert len(homes) == 3 and len(blobs) == 1


def test_only_timestepped_carries_replicas():
    for name in ("cmb", "timewarp"):
        with pytest.raises(EngineConfigError):
            run(name, "gossip", GOSSIP, END, 4, replicas=2)


def test_directory_lists_all_live_replicas():
    d = ReplicaManager(place_replicas(3, 3, 3), 3).directory()
    assert isinstance(d, Directory)
    assert [h[0] for h in d.homes] == [0, 1, 2]
    assert all(sorted(h) == [0, 1, 2] for h in d.homes)
