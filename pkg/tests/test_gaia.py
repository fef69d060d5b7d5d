from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from adaptsim.gaia import (
    CommPattern,
    Gaia,
    HeuristicParams,
    MigrationPlan,
    PlanEntry,
    evaluate_clustering,
    evaluate_consolidation,
    evaluate_load,
    is_light,
    local_affinity,
    record_interaction,
)
from adaptsim.metrics import LpWindow
from adaptsim.model import make_model
from adaptsim.runtime import Directory, EnvProfile, Episode
from adaptsim.sync import make_engine

from helpers import oracle, run


def window(lp, load, events=40, length=1.0):
    return LpWindow(lp, 0, 0.0, length, events, load * length, (1 - load) * length, 0, 0, 0)


def pattern_with(counts, se=0, window=4):
    p = CommPattern(window)
    for lp, n in counts.items():
        p.record(se, lp, n)
    p.rotate()
    return p


P = HeuristicParams()


# -- communication pattern ----------------------------------------------------

def test_record_interaction_counts_sends():
    p = CommPattern()
    for _ in range(10):
        record_interaction(p, 3, 2)
    assert p.current[3] == Counter({2: 10})
    p.rotate()
    assert p.counts(3) == Counter({2: 10})


def test_rotation_drops_the_oldest_round():
    p = CommPattern(window=4)
    for r in range(5):
        p.record(0, r, 1)
        p.rotate()
    assert p.counts(0) == Counter({1: 1, 2: 1, 3: 1, 4: 1})
    assert p.rounds(0) == 4


def test_silent_entity_stays():
    p = CommPattern()
    p.rotate()
    assert evaluate_clustering(p, 0, 0, P) is None
    assert local_affinity(p, 0, 0) == 0.0


# -- clustering ---------------------------------------------------------------

def test_clustering_proposes_dominant_partner():
    assert evaluate_clustering(pattern_with({0: 1, 2: 9}), 0, 0, P) == 2


def test_clustering_needs_more_than_alpha():
    assert evaluate_clustering(pattern_with({0: 5, 2: 5}), 0, 0, P) is None
    # exactly alpha is not enough either
    assert evaluate_clustering(pattern_with({0: 3, 2: 7}), 0, 0, P) is None


def test_clustering_respects_residency():
    p = pattern_with({2: 9, 0: 1})
    assert evaluate_clustering(p, 0, 0, P, round_no=5, last_migrated=4) is None
    assert evaluate_clustering(p, 0, 0, P, round_no=6, last_migrated=4) == 2


def test_clustering_weighs_migration_cost():
    p = pattern_with({0: 1, 2: 9})
    # benefit 8 messages vs 0.01 x 1000 bytes = 10
    assert evaluate_clustering(p, 0, 0, P, state_size=1000) is None
    assert evaluate_clustering(p, 0, 0, P, state_size=700) == 2


def test_already_home():
    assert evaluate_clustering(pattern_with({0: 9, 2: 1}), 0, 0, P) is None


# -- load balancing -------------------------------------------------------------

def _hosted4():
    return {lp: [lp * 4 + i for i in range(4)] for lp in range(4)}


def _events(hosted, n=10):
    return {lp: {se: n for se in ses} for lp, ses in hosted.items()}


def test_overloaded_lp_evicts_toward_smallest_least_loaded():
    hosted = _hosted4()
    wins = {lp: window(lp, v) for lp, v in enumerate([0.9, 0.3, 0.3, 0.3])}
    plan = evaluate_load(wins, P, hosted=hosted, entity_events=_events(hosted))
    assert plan and plan[0] == PlanEntry(0, 0, 1, "load")
    assert {e.src for e in plan} == {0}
    # spreading: the second eviction goes to the next least-loaded LP
    assert plan[1].dst == 2


def test_uniform_loads_evict_nothing():
    hosted = _hosted4()
    wins = {lp: window(lp, 0.5) for lp in range(4)}
    assert evaluate_load(wins, P, hosted=hosted, entity_events=_events(hosted)) == []


def test_lowest_affinity_leaves_first():
    hosted = _hosted4()
    wins = {lp: window(lp, v) for lp, v in enumerate([0.9, 0.3, 0.3, 0.3])}
    aff = {0: 0.9, 1: 0.1, 2: 0.5, 3: 0.7}
    plan = evaluate_load(wins, P, hosted=hosted, entity_events=_events(hosted), affinity=lambda se, lp: aff[se])
    assert plan[0].entity == 1


def test_idle_lps_are_not_bottlenecks():
    hosted = _hosted4()
    wins = {lp: window(lp, v) for lp, v in enumerate([0.1, 0.01, 0.01, 0.01])}
    assert evaluate_load(wins, P, hosted=hosted, entity_events=_events(hosted)) == []


def test_load_cap():
    hosted = _hosted4()
    wins = {lp: window(lp, v) for lp, v in enumerate([1.0, 0.0, 0.0, 0.0])}
    plan = evaluate_load(wins, P, hosted=hosted, entity_events=_events(hosted), cap=1)
    assert len(plan) == 1


# -- consolidation ----------------------------------------------------------------

def test_light_round_detection():
    wins = {lp: window(lp, 0.2) for lp in range(4)}
    assert not is_light(wins, P)
    assert is_light(wins, HeuristicParams(shrink_load=0.5))
    assert not is_light(wins, HeuristicParams(shrink_load=0.1))


def test_consolidation_drains_the_emptiest_lp():
    params = HeuristicParams(shrink_load=0.5)
    hosted = {0: [0, 1, 2], 1: [3, 4], 2: [5, 6, 7]}
    wins = {lp: window(lp, 0.1) for lp in hosted}
    p = CommPattern()
    p.record(3, 2, 5)
    p.rotate()
    plan = evaluate_consolidation(wins, params, hosted=hosted, pattern=p, cap=10)
    assert [(e.entity, e.src) for e in plan] == [(3, 1), (4, 1)]
    assert plan[0].dst == 2  # where it talks to
    assert plan[1].dst == 0  # otherwise the fuller LP, smaller index on ties


def test_consolidation_off_by_default():
    hosted = {0: [0], 1: [1]}
    wins = {lp: window(lp, 0.01) for lp in hosted}
    assert evaluate_consolidation(wins, P, hosted=hosted, pattern=CommPattern(), cap=10) == []


# -- plans ------------------------------------------------------------------------

def test_plan_rejects_duplicates_and_self_moves():
    plan = MigrationPlan()
    assert plan.add(PlanEntry(1, 0, 2, "load"))
    assert not plan.add(PlanEntry(1, 0, 3, "clustering"))
    assert not plan.add(PlanEntry(2, 1, 1, "clustering"))
    assert len(plan) == 1


def test_params_validation():
    for bad in ({"alpha": 0.5}, {"alpha": 1.1}, {"delta": 0}, {"window": 0}, {"residency": -1},
                {"max_migrations_per_round": -1}, {"migration_cost_weight": -1}):
        with pytest.raises(ValueError):
            HeuristicParams(**bad)
    assert HeuristicParams().cap(100) == 10
    assert HeuristicParams().cap(3) == 1
    assert HeuristicParams(max_migrations_per_round=0).cap(100) == 0


def test_controller_validation():
    with pytest.raises(ValueError):
        Gaia(P, 4, 2, mode="chaotic")
    with pytest.raises(ValueError):
        Gaia(P, 4, 2, round_ticks=0)


@settings(max_examples=200)
@given(
    n_lps=st.integers(2, 5),
    placement=st.lists(st.integers(0, 4), min_size=1, max_size=30),
    loads=st.lists(st.floats(0, 1), min_size=5, max_size=5),
    sends=st.lists(st.tuples(st.integers(0, 29), st.integers(0, 4), st.integers(1, 20)), max_size=60),
    shrink=st.sampled_from([0.0, 0.3]),
    mode=st.sampled_from(["heuristic", "random"]),
)
def test_plan_invariants(n_lps, placement, loads, sends, shrink, mode):
    homes = [[h % n_lps] for h in placement]
    n = len(homes)
    d = Directory(homes)
    g = Gaia(HeuristicParams(shrink_load=shrink), n, n_lps, mode=mode, seed=3)
    for se, lp, k in sends:
        if se < n:
            g.pattern.record(se, lp % n_lps, k)
    wins = {}
    for lp in range(n_lps):
        w = window(lp, loads[lp])
        w.entity_events = {se: 5 for se in range(n) if homes[se][0] == lp}
        wins[lp] = w
    plan = g.plan(d, wins, state_size=lambda se: 64, live=list(range(n_lps)))
    ents = [e.entity for e in plan]
    assert len(ents) == len(set(ents))
    for e in plan:
        assert e.src != e.dst and e.src == homes[e.entity][0] and 0 <= e.dst < n_lps
    if not is_light(wins, g.params):
        assert len(plan) <= g.params.cap(n)


# -- whole runs ------------------------------------------------------------------

def _engine(name, model, params, end, n_lps, seed=0, **gaia_kw):
    m = make_model(model, params)
    rt = gaia_kw.pop("round_ticks", 10)
    mode = gaia_kw.pop("mode", "heuristic")
    g = Gaia(HeuristicParams(**gaia_kw), m.n_entities, n_lps, seed=seed, mode=mode, round_ticks=rt)
    return make_engine(name, m, seed=seed, end_time=end, n_lps=n_lps, gaia=g, placement="round_robin")


@pytest.mark.parametrize("engine", ["timestepped", "cmb", "timewarp"])
def test_random_migrations_are_invisible(engine):
    params = {"n": 60, "rumor_period": 10}
    r = run(engine, "gossip", params, 80, 3, seed=1, gaia={"mode": "random", "round_ticks": 5})
    assert r.report.counters.migrations > 0
    assert r.trace_text() == oracle("gossip", params, 80, 1)


@pytest.mark.parametrize("engine", ["timestepped", "cmb", "timewarp"])
def test_every_entity_has_one_home_after_migrating(engine):
    e = _engine(engine, "gossip", {"n": 50, "rumor_period": 10}, 60, 3, mode="random", round_ticks=5)
    r = e.run()
    assert r.ok and r.report.counters.migrations > 0
    hosted = Counter()
    for lp in e.lps:
        hosted.update(lp.states.keys())
    assert all(len(h) == 1 for h in r.directory.homes)
    assert hosted == Counter(range(50))
    for eid, h in enumerate(r.directory.homes):
        assert eid in e.lps[h[0]].states
    # no event lost or duplicated
    keys = [x.key for x in r.trace]
    assert len(keys) == len(set(keys))


def test_hysteresis_in_a_heuristic_run():
    params = {"n": 100, "graph": {"kind": "two_cliques"}, "rumor_period": 10, "origins": [0, 99]}
    r = run("timestepped", "gossip", params, 200, 2, gaia={"residency": 3})
    last = {}
    assert r.report.migration_log
    for rnd, se, _src, _dst, _why in r.report.migration_log:
        if se in last:
            assert rnd - last[se] >= 3
        last[se] = rnd


def test_consolidation_shrinks_to_one_lp():
    r = run("timestepped", "phold", {"n": 16, "population": 1}, 200, 4, gaia={"shrink_load": 0.5})
    counts = r.directory.counts(4)
    assert sorted(counts) == [0, 0, 0, 16]
    assert {x[4] for x in r.report.migration_log} == {"consolidation"}
    assert max(x[0] for x in r.report.migration_log) <= 10


def test_balancing_moves_work_off_a_slow_lp():
    params = {"n": 400, "rumor_period": 20}
    prof = EnvProfile([1000.0] * 4, background=[Episode(3, 0.0, 1e9, 2.0)])
    off = run("timestepped", "gossip", params, 200, 4, profile=prof)
    on = run("timestepped", "gossip", params, 200, 4, profile=prof, gaia={})
    assert on.trace_text() == off.trace_text()
    assert any(x[2] == 3 and x[4] == "load" for x in on.report.migration_log)
    assert on.directory.counts(4)[3] < off.directory.counts(4)[3]
