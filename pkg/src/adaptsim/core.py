"""Events, their canonical total order, and the pending-event list.

Simulation time is an integer tick count. Every engine orders events by the
same placement-independent key ``(recv_time, target, sender, send_seq)`` so
that a parallel run can be compared line by line with a sequential one.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, NamedTuple, Union


class SimError(Exception):
    """Base class for every error raised by the simulator."""


class DuplicateEventError(SimError):
    pass


class EmptyEventListError(SimError):
    pass


class CausalityError(SimError):
    """An entity emitted an event that does not lie strictly in its future."""


class Sign(enum.IntEnum):
    POSITIVE = 1
    ANTI = -1


class EventId(NamedTuple):
    sender: int
    send_seq: int


@dataclass(frozen=True, slots=True)
class Group:
    """A multicast target: a group id plus the member entities addressed."""

    gid: int
    members: tuple[int, ...]


EntityTarget = Union[int, Group]

# Sorts before every real key; used as "position before the first event".
MIN_KEY = (-1, -1, -1, -1)


@dataclass(frozen=True, slots=True)
class Event:
    id: EventId
    source: int
    target: EntityTarget
    send_time: int
    recv_time: int
    kind: int
    payload: bytes = b""
    sign: Sign = Sign.POSITIVE

    def __post_init__(self) -> None:
        if self.recv_time <= self.send_time:
            raise CausalityError(
                f"event {self.id} has recv_time {self.recv_time} <= send_time {self.send_time}"
            )

    @property
    def target_id(self) -> int:
        t = self.target
        return t.gid if isinstance(t, Group) else t

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.recv_time, self.target_id, self.id.sender, self.id.send_seq)

    @property
    def is_anti(self) -> bool:
        return self.sign is Sign.ANTI

    def anti(self) -> "Event":
        return replace(self, sign=Sign.ANTI)

    def retarget(self, target: EntityTarget) -> "Event":
        return replace(self, target=target)

    def trace_line(self) -> str:
        return f"{self.recv_time},{self.target_id},{self.id.sender},{self.id.send_seq},{self.kind}\n"


def event_order(a: Event, b: Event) -> int:
    """Three-way comparison under the canonical order: -1, 0 or 1."""
    ka, kb = a.key, b.key
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


class EventList:
    """Min-heap of events under the canonical order.

    Supports removal by ``(target, id)`` so Time Warp can annihilate a queued
    event with its anti-message. Removed entries are deleted lazily.
    """

    def __init__(self, events: Iterable[Event] = ()) -> None:
        # the counter breaks ties between a stale entry and a re-enqueued one
        self._heap: list[tuple[tuple[int, int, int, int], int, Event]] = []
        self._live: dict[tuple[int, int, int, int], Event] = {}
        self._n = 0
        for e in events:
            self.enqueue(e)

    def __len__(self) -> int:
        return len(self._live)

    def __bool__(self) -> bool:
        return bool(self._live)

    def __contains__(self, key: object) -> bool:
        return key in self._live

    def __iter__(self) -> Iterator[Event]:
        return iter(sorted(self._live.values(), key=lambda e: e.key))

    def enqueue(self, e: Event) -> None:
        k = e.key
        if k in self._live:
            raise DuplicateEventError(f"event {e.id} for target {e.target_id} already queued")
        self._live[k] = e
        self._n += 1
        heapq.heappush(self._heap, (k, self._n, e))

    def _prune(self) -> None:
        heap, live = self._heap, self._live
        while heap and live.get(heap[0][0]) is not heap[0][2]:
            heapq.heappop(heap)

    def peek_min(self) -> Event:
        self._prune()
        if not self._heap:
            raise EmptyEventListError("event list is empty")
        return self._heap[0][2]

    def min_time(self, default: float = float("inf")) -> float:
        self._prune()
        return self._heap[0][0][0] if self._heap else default

    def dequeue_min(self) -> Event:
        self._prune()
        if not self._heap:
            raise EmptyEventListError("event list is empty")
        k, _, e = heapq.heappop(self._heap)
        del self._live[k]
        return e

    def remove(self, key: tuple[int, int, int, int]) -> Event | None:
        """Drop the event with this key if queued; returns it or None."""
        return self._live.pop(key, None)

    def pop_where(self, pred) -> list[Event]:
        """Remove and return (in canonical order) every event matching ``pred``."""
        taken = [e for e in self._live.values() if pred(e)]
        for e in taken:
            del self._live[e.key]
        taken.sort(key=lambda e: e.key)
        return taken


def parse_trace_line(line: str) -> tuple[int, int, int, int, int]:
    parts = line.rstrip("\n").split(",")
    if len(parts) != 5:
        raise ValueError(f"malformed trace line: {line!r}")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise ValueError(f"malformed trace line: {line!r}") from None


def format_trace(events: Iterable[Event]) -> str:
    return "".join(e.trace_line() for e in sorted(events, key=lambda e: e.key))
