import pytest

from adaptsim.core import CausalityError
from adaptsim.runtime import CrashSpec, EnvProfile
from adaptsim.sync import EngineConfigError, EngineOptions, cmb_safe_bound, null_timestamp

from helpers import oracle, run


def test_safe_bound():
    assert cmb_safe_bound([7, 9], 5) == 7
    assert cmb_safe_bound([3, 9], 5) == 3
    assert cmb_safe_bound([], 5) == float("inf")


def test_null_timestamp():
    assert null_timestamp(10, 2) == 12
    with pytest.raises(EngineConfigError):
        null_timestamp(10, 0)


def test_zero_lookahead_is_refused():
    with pytest.raises(EngineConfigError):
        run("cmb", "phold", {"n": 2}, 10, 2, options=EngineOptions(lookahead=0))


def test_only_on_block_nulls_are_implemented():
    with pytest.raises(EngineConfigError):
        run("cmb", "phold", {"n": 2}, 10, 2, options=EngineOptions(null_policy="per_event"))


def test_idle_cycle_terminates_on_nulls_alone():
    r = run("cmb", "phold", {"n": 2, "topology": "ring", "population": 0}, 50, 2)
    assert r.ok and r.trace == []
    assert r.report.counters.null_messages > 0


def test_ring_traffic_is_safe_and_live():
    params = {"n": 2, "topology": "ring", "population": 1, "max_delay": 1}
    r = run("cmb", "phold", params, 200, 2, options=EngineOptions(lookahead=1))
    assert r.trace_text() == oracle("phold", params, 200)
    c = r.report.counters
    assert c.unsafe_processings == 0 and c.null_messages > 0


def test_single_lp_degenerates_to_sequential():
    params = {"n": 30, "rumor_period": 5}
    r = run("cmb", "gossip", params, 60, 1)
    assert r.trace_text() == oracle("gossip", params, 60)
    assert r.report.counters.null_messages == 0


def test_larger_lookahead_needs_fewer_nulls():
    lo = run("cmb", "phold", {"n": 8, "lookahead": 1, "max_delay": 8}, 200, 4)
    hi = run("cmb", "phold", {"n": 8, "lookahead": 4, "max_delay": 8}, 200, 4)
    assert hi.report.counters.null_messages < lo.report.counters.null_messages


def test_lookahead_promise_is_enforced():
    # the model only guarantees 1 tick, the engine is told 2
    with pytest.raises(CausalityError):
        run("cmb", "phold", {"n": 4, "lookahead": 1, "max_delay": 1}, 50, 2, options=EngineOptions(lookahead=2))


def test_crash_without_replicas_fails():
    r = run("cmb", "phold", {"n": 8}, 200, 4, profile=EnvProfile.uniform(4, crashes=[CrashSpec(1, 0.01)]))
    assert not r.ok and "LP1" in r.report.failure


def test_crash_of_an_empty_lp_is_harmless():
    params = {"n": 8, "population": 2}
    r = run("cmb", "phold", params, 100, 3, explicit_placement=[0, 1] * 4,
            profile=EnvProfile.uniform(3, crashes=[CrashSpec(2, 0.01)]))
    assert r.ok and r.trace_text() == oracle("phold", params, 100)
