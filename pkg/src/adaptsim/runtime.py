"""Logical processes, routing and the emulated execution environment.

Wall-clock time is emulated: every LP carries its own clock in emulated
seconds, processing is charged at the LP's (possibly degraded) speed and
channels deliver after a sampled latency. Nothing depends on the host
machine, so every experiment is reproducible bit for bit.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Iterable

from .core import Event, EventList, Group, SimError
from .metrics import Counters, LpWindow
from .model.base import EntityState
from .model.rng import CounterRNG, stream_key

log = logging.getLogger(__name__)

INF = float("inf")


class RoutingError(SimError):
    pass


class EnvConfigError(SimError):
    pass


class RunFailure(SimError):
    """The run cannot complete (e.g. an LP crashed and took entities with it)."""


class LpCrashed(SimError):
    pass


@dataclass(frozen=True)
class Episode:
    lp: int
    start: float
    end: float
    factor: float


@dataclass(frozen=True)
class CrashSpec:
    lp: int
    at: float


@dataclass
class EnvProfile:
    speeds: list[float]
    latency: float = 0.002
    jitter: float = 0.0
    channel_latency: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)
    crashes: list[CrashSpec] = field(default_factory=list)
    background: list[Episode] = field(default_factory=list)

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.speeds):
            raise EnvConfigError("LP speeds must be > 0")
        if self.latency < 0 or self.jitter < 0:
            raise EnvConfigError("latency and jitter must be >= 0")
        seen = set()
        for c in self.crashes:
            if not 0 <= c.lp < len(self.speeds):
                raise EnvConfigError(f"crash on unknown LP {c.lp}")
            if c.lp in seen:
                raise EnvConfigError(f"duplicate crash for LP {c.lp}")
            seen.add(c.lp)
        for ep in self.background:
            if not 0 <= ep.lp < len(self.speeds):
                raise EnvConfigError(f"background episode on unknown LP {ep.lp}")
            if ep.factor < 1.0 or ep.end < ep.start:
                raise EnvConfigError("background episodes need factor >= 1 and end >= start")

    @classmethod
    def uniform(cls, n_lps: int, speed: float = 1000.0, **kw: Any) -> "EnvProfile":
        return cls([speed] * n_lps, **kw)

    @property
    def n_lps(self) -> int:
        return len(self.speeds)

    def effective_speed(self, lp: int, wct: float) -> float:
        s = self.speeds[lp]
        for ep in self.background:
            if ep.lp == lp and ep.start <= wct < ep.end:
                s /= ep.factor
        return s

    def latency_of(self, src: int, dst: int) -> tuple[float, float]:
        return self.channel_latency.get((src, dst), (self.latency, self.jitter))

    @property
    def max_latency(self) -> float:
        lats = [self.latency] + [b for b, _ in self.channel_latency.values()]
        return max(lats)

    def crash_time(self, lp: int) -> float:
        for c in self.crashes:
            if c.lp == lp:
                return c.at
        return INF


def charge_processing(lp: int, n_events: int, profile: EnvProfile, now: float = 0.0) -> float:
    """Emulated seconds needed by ``lp`` to process ``n_events`` starting at ``now``."""
    if n_events < 0:
        raise ValueError("n_events must be >= 0")
    if n_events == 0:
        return 0.0
    return n_events / profile.effective_speed(lp, now)


class Channel:
    """FIFO link between two LPs; jitter is clamped so FIFO always holds."""

    def __init__(self, src: int, dst: int, base: float, jitter: float, seed: int = 0) -> None:
        self.src = src
        self.dst = dst
        self.base = base
        self.jitter = jitter
        self._rng = CounterRNG(stream_key(seed, src * 65536 + dst, salt=7))
        self.queue: deque[tuple[float, Any]] = deque()
        self.last = 0.0
        self.sent = 0
        self.received = 0

    def send(self, msg: Any, wct: float) -> float:
        d = wct + self.base
        if self.jitter:
            d += self.jitter * self._rng.random()
        d = max(d, self.last)
        self.last = d
        self.queue.append((d, msg))
        self.sent += 1
        return d

    def next_time(self) -> float:
        return self.queue[0][0] if self.queue else INF

    def deliver(self, now_wct: float) -> list[Any]:
        out = []
        q = self.queue
        while q and q[0][0] <= now_wct:
            out.append(q.popleft()[1])
        self.received += len(out)
        return out

    def drain(self) -> list[Any]:
        out = [m for _, m in self.queue]
        self.received += len(out)
        self.queue.clear()
        return out

    def __len__(self) -> int:
        return len(self.queue)


class Network:
    """All L*(L-1) channels plus crash bookkeeping."""

    def __init__(self, profile: EnvProfile, seed: int = 0) -> None:
        L = profile.n_lps
        self.n_lps = L
        self.profile = profile
        self.channels: dict[tuple[int, int], Channel] = {}
        for a in range(L):
            for b in range(L):
                if a != b:
                    base, jit = profile.latency_of(a, b)
                    self.channels[(a, b)] = Channel(a, b, base, jit, seed)
        self.inbound: list[list[Channel]] = [[self.channels[(a, b)] for a in range(L) if a != b] for b in range(L)]
        self.outbound: list[list[Channel]] = [[self.channels[(a, b)] for b in range(L) if a != b] for a in range(L)]
        self.crashed: set[int] = set()
        self.dropped = 0

    def send(self, src: int, dst: int, msg: Any, wct: float) -> float:
        if src in self.crashed or dst in self.crashed:
            self.dropped += 1
            return INF
        return self.channels[(src, dst)].send(msg, wct)

    def mark_crashed(self, lp: int) -> None:
        self.crashed.add(lp)
        for ch in self.inbound[lp]:
            self.dropped += len(ch)
            ch.queue.clear()

    def deliver(self, dst: int, now_wct: float) -> list[tuple[int, Any]]:
        """Everything due at ``dst`` by ``now_wct``, channel by channel in src order."""
        if dst in self.crashed:
            return []
        out = []
        for ch in self.inbound[dst]:
            if ch.queue and ch.queue[0][0] <= now_wct:
                out.extend((ch.src, m) for m in ch.deliver(now_wct))
        return out

    def next_arrival(self, dst: int) -> float:
        if dst in self.crashed:
            return INF
        return min((ch.next_time() for ch in self.inbound[dst]), default=INF)

    def last_delivery(self) -> float:
        return max((ch.queue[-1][0] for ch in self.channels.values() if ch.queue), default=0.0)

    def in_transit(self) -> Iterable[Any]:
        for ch in self.channels.values():
            for _, m in ch.queue:
                yield m

    def pending(self) -> int:
        return sum(len(ch) for ch in self.channels.values())


class Directory:
    """Entity -> hosting LP(s). Lists have length r under replication."""

    def __init__(self, homes: list[list[int]]) -> None:
        self.homes = homes

    @classmethod
    def from_placement(cls, placement: list[int]) -> "Directory":
        return cls([[lp] for lp in placement])

    def __len__(self) -> int:
        return len(self.homes)

    def home(self, eid: int) -> int:
        return self.homes[eid][0]

    def lps_of(self, eid: int) -> list[int]:
        try:
            h = self.homes[eid]
        except (IndexError, TypeError):
            raise RoutingError(f"unknown entity {eid}") from None
        if not h:
            raise RoutingError(f"entity {eid} has no live home")
        return h

    def move(self, eid: int, src: int, dst: int) -> None:
        h = self.homes[eid]
        if src not in h or dst in h:
            raise RoutingError(f"cannot move entity {eid} from LP{src} to LP{dst} (homes {h})")
        h[h.index(src)] = dst

    def hosted_by(self, lp: int) -> list[int]:
        return [e for e, h in enumerate(self.homes) if lp in h]

    def counts(self, n_lps: int) -> list[int]:
        c = [0] * n_lps
        for h in self.homes:
            for lp in h:
                c[lp] += 1
        return c


@dataclass
class Route:
    local: list[Event]
    remote: list[tuple[int, Event]]


def route(e: Event, directory: Directory, self_lp: int) -> Route:
    """Split an emitted event into local deliveries and one copy per remote LP.

    Group targets are partitioned by hosting LP; each remote copy carries only
    the members hosted there and is expanded on arrival.
    """
    t = e.target
    if isinstance(t, Group):
        per_lp: dict[int, list[int]] = {}
        for m in t.members:
            for lp in directory.lps_of(m):
                per_lp.setdefault(lp, []).append(m)
        local: list[Event] = []
        remote: list[tuple[int, Event]] = []
        for lp in sorted(per_lp):
            members = per_lp[lp]
            if lp == self_lp:
                local.extend(e.retarget(m) for m in members)
            else:
                remote.append((lp, e.retarget(Group(t.gid, tuple(members)))))
        return Route(local, remote)
    homes = directory.lps_of(t)
    if len(homes) == 1:
        if homes[0] == self_lp:
            return Route([e], [])
        return Route([], [(homes[0], e)])
    return Route([e] if self_lp in homes else [], [(lp, e) for lp in homes if lp != self_lp])


def expand(e: Event) -> list[Event]:
    """Per-entity copies of a (possibly group-addressed) arriving event."""
    t = e.target
    if isinstance(t, Group):
        return [e.retarget(m) for m in t.members]
    return [e]


class LogicalProcess:
    """Container of entity states with an emulated clock and window stats."""

    def __init__(self, lp_id: int, profile: EnvProfile) -> None:
        self.lp_id = lp_id
        self.profile = profile
        self.clock = 0.0
        self.states: dict[int, EntityState] = {}
        self.queue = EventList()
        self.crashed = False
        self.crash_at = profile.crash_time(lp_id)
        self.busy_total = 0.0
        self.processed_total = 0
        self.windows: list[LpWindow] = []
        self._win_start = 0.0
        self._win_busy = 0.0
        self._win_events = 0
        self.win_sent = 0
        self.win_recv = 0
        self.win_entity_events: Counter[int] = Counter()

    def __repr__(self) -> str:
        return f"LP{self.lp_id}(clock={self.clock:.4f}, entities={len(self.states)}, queued={len(self.queue)})"

    def charge(self, n_events: int = 1, entity: int | None = None) -> float:
        dt = charge_processing(self.lp_id, n_events, self.profile, self.clock)
        self.clock += dt
        self.busy_total += dt
        self._win_busy += dt
        self._win_events += n_events
        self.processed_total += n_events
        if entity is not None:
            self.win_entity_events[entity] += n_events
        return dt

    def charge_time(self, dt: float) -> None:
        """Busy time not tied to an event (e.g. state serialization)."""
        self.clock += dt
        self.busy_total += dt
        self._win_busy += dt

    def wait_until(self, t: float) -> None:
        if t > self.clock:
            self.clock = t

    def should_crash(self) -> bool:
        return not self.crashed and self.clock >= self.crash_at

    def close_window(self, now: float) -> LpWindow:
        end = max(now, self.clock, self._win_start)
        w = LpWindow(
            lp=self.lp_id,
            window=len(self.windows),
            start=self._win_start,
            end=end,
            events=self._win_events,
            busy=self._win_busy,
            idle=max(0.0, (end - self._win_start) - self._win_busy),
            remote_sent=self.win_sent,
            remote_recv=self.win_recv,
            entities=len(self.states),
        )
        w.entity_events = dict(self.win_entity_events)  # type: ignore[attr-defined]
        self.windows.append(w)
        self._win_start = end
        self._win_busy = 0.0
        self._win_events = 0
        self.win_sent = 0
        self.win_recv = 0
        self.win_entity_events = Counter()
        return w

    @property
    def idle_total(self) -> float:
        return sum(w.idle for w in self.windows)


def initial_placement(n: int, n_lps: int, scheme: str, seed: int = 0, explicit: list[int] | None = None) -> list[int]:
    if explicit is not None:
        if len(explicit) != n or any(not 0 <= p < n_lps for p in explicit):
            raise EnvConfigError("explicit placement must give an LP in range for every entity")
        return list(explicit)
    if scheme == "round_robin":
        return [e % n_lps for e in range(n)]
    if scheme == "block":
        return [e * n_lps // n for e in range(n)]
    if scheme == "random":
        rng = CounterRNG(stream_key(seed, 0, salt=11))
        return [rng.randbelow(n_lps) for _ in range(n)]
    raise EnvConfigError(f"unknown placement {scheme!r}")


__all__ = [
    "Channel", "Counters", "CrashSpec", "Directory", "EnvConfigError", "EnvProfile", "Episode", "LogicalProcess",
    "LpCrashed", "Network", "Route", "RoutingError", "RunFailure", "charge_processing", "expand",
    "initial_placement", "route",
]
