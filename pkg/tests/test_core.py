import pytest
from hypothesis import given, strategies as st

from adaptsim.core import (
    CausalityError,
    DuplicateEventError,
    EmptyEventListError,
    EventList,
    Group,
    event_order,
    format_trace,
    parse_trace_line,
)

from helpers import ev


def test_order_timestamp_dominates():
    assert event_order(ev(3, target=9), ev(7, target=0)) == -1


def test_order_ties_on_target():
    assert event_order(ev(5, target=2), ev(5, target=9)) == -1
    assert event_order(ev(5, target=9), ev(5, target=2)) == 1


def test_order_identity_is_equal():
    assert event_order(ev(5, 1, 2, 3), ev(5, 1, 2, 3)) == 0


def test_order_then_sender_then_seq():
    assert event_order(ev(5, 1, 2, 9), ev(5, 1, 3, 0)) == -1
    assert event_order(ev(5, 1, 2, 1), ev(5, 1, 2, 0)) == 1


def test_event_must_move_forward_in_time():
    with pytest.raises(CausalityError):
        ev(4, send=4)


def test_enqueue_into_empty():
    q = EventList()
    e = ev(3)
    q.enqueue(e)
    assert len(q) == 1 and q.peek_min() is e


def test_enqueue_smaller_becomes_min():
    e1, e2 = ev(7), ev(3, sender=1)
    q = EventList([e1])
    q.enqueue(e2)
    assert q.peek_min() is e2


def test_duplicate_rejected():
    q = EventList([ev(3)])
    with pytest.raises(DuplicateEventError):
        q.enqueue(ev(3))


def test_dequeue_min_and_tie_break():
    q = EventList([ev(7), ev(3, sender=1)])
    assert q.dequeue_min().recv_time == 3
    q = EventList([ev(5, target=9), ev(5, target=2)])
    assert q.dequeue_min().target == 2


def test_dequeue_empty():
    with pytest.raises(EmptyEventListError):
        EventList().dequeue_min()
    with pytest.raises(EmptyEventListError):
        EventList().peek_min()


def test_remove_then_reenqueue_same_key():
    q = EventList([ev(5), ev(6, sender=1)])
    assert q.remove(ev(5).key) is not None
    assert q.remove(ev(5).key) is None
    q.enqueue(ev(5))
    assert [e.recv_time for e in (q.dequeue_min(), q.dequeue_min())] == [5, 6]
    assert not q and q.min_time() == float("inf")


def test_pop_where_returns_sorted():
    q = EventList([ev(9, 1), ev(2, 1, 1), ev(4, 2)])
    taken = q.pop_where(lambda e: e.target == 1)
    assert [e.recv_time for e in taken] == [2, 9]
    assert len(q) == 1


def test_group_key_uses_gid():
    e = ev(5).retarget(Group(42, (1, 2)))
    assert e.key == (5, 42, 0, 0)
    assert e.trace_line() == "5,42,0,0,1\n"


def test_trace_lines_round_trip():
    evs = [ev(5, 1, 2, 3, kind=4), ev(2, 0, 1, 0)]
    text = format_trace(evs)
    assert text == "2,0,1,0,1\n5,1,2,3,4\n"
    assert parse_trace_line("5,1,2,3,4\n") == (5, 1, 2, 3, 4)
    for bad in ("5,1,2,3", "a,1,2,3,4", "1,2,3,4,5,6"):
        with pytest.raises(ValueError):
            parse_trace_line(bad)


keys = st.tuples(st.integers(1, 20), st.integers(0, 5), st.integers(0, 5), st.integers(0, 5))


@given(st.sets(keys, min_size=1, max_size=40), st.randoms())
def test_dequeue_sequence_is_sorted_regardless_of_insertion(ks, rnd):
    events = [ev(r, t, s, q) for r, t, s, q in ks]
    shuffled = list(events)
    rnd.shuffle(shuffled)
    a = EventList(events)
    b = EventList(shuffled)
    out_a = [a.dequeue_min().key for _ in range(len(events))]
    out_b = [b.dequeue_min().key for _ in range(len(events))]
    assert out_a == out_b == sorted(ks)


@given(keys, keys, keys)
def test_event_order_is_a_total_order(ka, kb, kc):
    a, b, c = (ev(*k) for k in (ka, kb, kc))
    assert event_order(a, b) == -event_order(b, a)
    assert (event_order(a, b) == 0) == (ka == kb)
    if event_order(a, b) <= 0 and event_order(b, c) <= 0:
        assert event_order(a, c) <= 0


@given(st.sets(keys, min_size=1, max_size=30), st.data())
def test_removals_keep_size_and_order(ks, data):
    ks = sorted(ks)
    q = EventList(ev(*k) for k in ks)
    gone = data.draw(st.sets(st.sampled_from(ks)))
    for k in gone:
        q.remove(k)
    rest = [k for k in ks if k not in gone]
    assert len(q) == len(rest)
    assert [q.dequeue_min().key for _ in rest] == rest
