"""Optimistic engine: Time Warp with aggressive cancellation.

LPs process whatever they have in canonical order without waiting. An
arrival timestamped before the LP's virtual time, or before the last event
its own entity processed (a straggler), rolls the LP back. Every event
processed from the straggler on is re-queued and its sends are cancelled
by anti-messages; the entities that lost events get their state back from
the latest snapshot and re-execute, silently, what they had processed
between that snapshot and the straggler (those sends are still valid).

A coordinator takes an atomic cut every ``gvt_period`` emulated seconds.
GVT is the minimum over queued and in-transit timestamps; everything
strictly below it is committed and the history kept for rollback shrinks
accordingly. GAIA migrations happen at GVT rounds, using committed state.
"""

from __future__ import annotations

import heapq
import logging
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field

from ..core import MIN_KEY, Event, Group, SimError
from ..model.base import EntityState
from ..runtime import INF, EnvProfile, LogicalProcess, expand, route
from .base import Engine, EngineConfigError

log = logging.getLogger(__name__)

_CRASH, _GVT, _WAKE = 0, 1, 2

Key = tuple[int, int, int, int]


class RollbackError(SimError):
    """No snapshot precedes the rollback target: an engine bug."""


@dataclass
class Record:
    event: Event
    prev: Key  # the target's previous last-processed key, restored on undo
    local: list[Key] = field(default_factory=list)
    remote: list[tuple[int, Event]] = field(default_factory=list)


class TwLp(LogicalProcess):
    """LP with speculative history.

    ``records`` is the processing history (times non-decreasing); positions
    are absolute, ``base`` being the position of ``records[0]`` after fossil
    collection. A snapshot at position p holds the states after the first p
    records.
    """

    def __init__(self, lp_id: int, profile: EnvProfile) -> None:
        super().__init__(lp_id, profile)
        self.hosted: set[int] = set()
        self.records: list[Record] = []
        self.rec_times: list[int] = []
        self.base = 0
        self.processed: set[Key] = set()
        self.last_key: dict[int, Key] = {}
        self.snap_pos: list[int] = []
        self.snap_states: list[dict[int, EntityState]] = []
        self.fresh: set[int] = set()  # entities whose current state is a private copy
        self.orphans: Counter[Key] = Counter()
        self.floor_time = -1  # time of the newest fossil-collected record
        self.since_snap = 0
        self.commit_frontier = 0

    @property
    def lvt(self) -> int:
        return self.rec_times[-1] if self.rec_times else self.floor_time

    @property
    def position(self) -> int:
        return self.base + len(self.records)

    def take_snapshot(self) -> None:
        self.snap_pos.append(self.position)
        self.snap_states.append(dict(self.states))
        self.fresh = set()
        self.since_snap = 0

    def own(self, eid: int) -> EntityState:
        """Copy-on-write: the first touch after a snapshot clones the state."""
        if eid not in self.fresh:
            self.states[eid] = self.states[eid].clone()
            self.fresh.add(eid)
        return self.states[eid]


def compute_gvt(queue_mins, in_transit_times) -> float:
    """min over unprocessed and in-transit timestamps (+inf when both are empty)."""
    return min(min(queue_mins, default=INF), min(in_transit_times, default=INF))


class TimeWarpEngine(Engine):
    name = "timewarp"

    def __init__(self, model, **kw) -> None:
        super().__init__(model, **kw)
        if self.opts.snapshot_every < 1:
            raise EngineConfigError("snapshot_every must be >= 1")
        if self.opts.gvt_period <= 0:
            raise EngineConfigError("gvt_period must be > 0")
        self.gvt_history: list[tuple[float, int]] = []
        self.gvt = 0.0

    def make_lp(self, i: int) -> TwLp:
        return TwLp(i, self.profile)

    def install(self, lp, st) -> None:  # type: ignore[override]
        lp.states[st.eid] = st
        lp.hosted.add(st.eid)
        lp.fresh.discard(st.eid)
        for snap in lp.snap_states:
            snap[st.eid] = st

    # -- scheduling ----------------------------------------------------
    def _wake(self, i: int, t: float) -> None:
        if t < self.scheduled[i]:
            self.scheduled[i] = t
            heapq.heappush(self.heap, (t, _WAKE, i))

    def send(self, lp, dst, msg, *, counter="remote_messages"):
        d = super().send(lp, dst, msg, counter=counter)
        if d < INF:
            self._wake(dst, d)
        return d

    # -- forward execution -------------------------------------------------
    def process_one(self, lp: TwLp) -> None:
        e = lp.queue.dequeue_min()
        x = e.target
        st = lp.own(x)  # type: ignore[arg-type]
        _, out = self.model.handle_event(st, e, e.recv_time)
        lp.charge(1, x)  # type: ignore[arg-type]
        self.counters.total_processed += 1
        rec = Record(e, lp.last_key.get(x, MIN_KEY))  # type: ignore[arg-type]
        for o in out:
            r = route(o, self.directory, lp.lp_id)
            for ev in r.local:
                self.counters.local_messages += 1
                self.enqueue_local(lp, ev)
                rec.local.append(ev.key)
            for dst, ev in r.remote:
                self.send(lp, dst, ev)
                rec.remote.append((dst, ev))
        lp.records.append(rec)
        lp.rec_times.append(e.recv_time)
        lp.processed.add(e.key)
        lp.last_key[x] = e.key  # type: ignore[index]
        lp.since_snap += 1
        if lp.since_snap >= self.opts.snapshot_every:
            lp.take_snapshot()

    # -- rollback ----------------------------------------------------------
    def rollback(self, lp: TwLp, k: Key) -> int:
        """Undo the history from the first processed event with key >= k.

        Within one timestamp the history is in arrival order, so anything
        after that point is undone too (more than strictly needed, never less).
        Returns the number of undone events.
        """
        i = bisect_left(lp.rec_times, k[0])
        n = len(lp.records)
        while i < n and lp.records[i].event.key < k:
            i += 1
        a = lp.base + i
        si = bisect_right(lp.snap_pos, a) - 1
        if si < 0:
            raise RollbackError(f"LP{lp.lp_id}: no snapshot at or before position {a} for {k}")
        self.counters.rollbacks += 1
        undone = lp.records[i:]
        del lp.records[i:]
        del lp.rec_times[i:]
        q = lp.queue
        for rec in reversed(undone):
            e = rec.event
            lp.processed.discard(e.key)
            if rec.prev == MIN_KEY:
                lp.last_key.pop(e.target, None)  # type: ignore[arg-type]
            else:
                lp.last_key[e.target] = rec.prev  # type: ignore[index]
            q.enqueue(e)
        for rec in undone:
            for lk in rec.local:
                q.remove(lk)
            for _, ev in rec.remote:
                self._cancel(lp, ev)
        self.counters.rolled_back_events += len(undone)
        pos = lp.snap_pos[si]
        snap = lp.snap_states[si]
        del lp.snap_pos[si + 1:]
        del lp.snap_states[si + 1:]
        # Entities never read each other's state, so only those that lost
        # events need restoring; everyone else's current state is still right.
        hosted = lp.hosted
        affected = {rec.event.target for rec in undone} & hosted
        for x in affected:
            lp.states[x] = snap[x]  # type: ignore[index]
        lp.fresh -= affected
        # coast forward: re-execute their part of [pos, a) silently; those sends stand
        for rec in lp.records[pos - lp.base:]:
            e = rec.event
            if e.target in affected:
                self.model.handle_event(lp.own(e.target), e, e.recv_time)  # type: ignore[arg-type]
                lp.charge(1, e.target)  # type: ignore[arg-type]
                self.counters.total_processed += 1
        lp.since_snap = a - pos
        return len(undone)

    def _cancel(self, lp: TwLp, ev: Event) -> None:
        """Send the anti-message of a remote copy to wherever its targets live now.

        Using the current home (not the logged destination) keeps each anti on
        the same FIFO channel as any re-sent positive after a migration.
        """
        t = ev.target
        members = t.members if isinstance(t, Group) else (t,)
        by_home: dict[int, list[int]] = {}
        for m in members:
            by_home.setdefault(self.directory.home(m), []).append(m)
        for h in sorted(by_home):
            ms = by_home[h]
            if h == lp.lp_id:
                for m in ms:
                    lp.queue.remove((ev.recv_time, m, ev.id.sender, ev.id.send_seq))
                continue
            copy = ev.retarget(Group(t.gid, tuple(ms))) if isinstance(t, Group) else ev
            self.send(lp, h, copy.anti(), counter="anti_messages")

    # -- arrivals ----------------------------------------------------------
    def _arrive(self, lp: TwLp, ev: Event) -> None:
        k = ev.key
        q = lp.queue
        if ev.is_anti:
            if k in q:
                q.remove(k)
            elif k in lp.processed:
                self.rollback(lp, k)
                q.remove(k)
            else:
                lp.orphans[k] += 1
            return
        if lp.orphans.get(k):
            lp.orphans[k] -= 1
            if not lp.orphans[k]:
                del lp.orphans[k]
            return
        # a straggler: in the past, or at the present but ahead of its own entity
        if ev.recv_time < lp.lvt or lp.last_key.get(ev.target, MIN_KEY) > k:  # type: ignore[arg-type]
            self.rollback(lp, k)
        q.enqueue(ev)

    def _deliver(self, lp: TwLp, upto: float) -> None:
        for _, msg in self.network.deliver(lp.lp_id, upto):
            for ev in self.accept_remote(lp, msg):
                self._arrive(lp, ev)

    def accept_remote(self, lp, msg):
        lp.win_recv += 1
        out = []
        for ev in expand(msg):
            if ev.target not in lp.hosted:
                self.forward(lp, ev)
                continue
            if not ev.is_anti:
                self.delivery_mode[ev.key] = True
            out.append(ev)
        return out

    def receive_transferred(self, dst, e) -> None:  # type: ignore[override]
        self._arrive(dst, e)

    # -- GVT, commit, fossil collection ------------------------------------
    def gvt_round(self, now: float) -> float:
        live = [lp for lp in self.lps if not lp.crashed]
        gvt = compute_gvt((lp.queue.min_time() for lp in live), (m.recv_time for m in self.network.in_transit()))
        if gvt < self.gvt:
            raise SimError(f"GVT went backwards: {self.gvt} -> {gvt}")
        self.gvt = gvt
        self.counters.gvt_rounds += 1
        batch: list[Event] = []
        for lp in live:
            self._commit_lp(lp, gvt, batch)
            self._fossil_collect(lp, gvt)
        self.commit(batch)
        self.gvt_history.append((gvt, len(self.committed)))
        return gvt

    def _commit_lp(self, lp: TwLp, gvt: float, out: list[Event]) -> None:
        hi = lp.base + (bisect_left(lp.rec_times, gvt) if gvt < INF else len(lp.records))
        for rec in lp.records[lp.commit_frontier - lp.base:hi - lp.base]:
            out.append(rec.event)
        lp.commit_frontier = max(lp.commit_frontier, hi)

    def _fossil_collect(self, lp: TwLp, gvt: float) -> None:
        """Keep the newest snapshot before GVT and the history after it."""
        if gvt == INF:
            gvt = self.end_time + 1
        a = lp.base + bisect_left(lp.rec_times, gvt)
        si = bisect_right(lp.snap_pos, a) - 1
        if si <= 0:
            return
        del lp.snap_pos[:si]
        del lp.snap_states[:si]
        cut = lp.snap_pos[0] - lp.base
        if cut <= 0:
            return
        for rec in lp.records[:cut]:
            lp.processed.discard(rec.event.key)
        lp.floor_time = lp.rec_times[cut - 1]
        del lp.records[:cut]
        del lp.rec_times[:cut]
        lp.base += cut

    # -- migration at a GVT round --------------------------------------------
    def _flush(self) -> None:
        """Deliver everything in flight (the mapping-change handshake)."""
        net = self.network
        while net.pending():
            for lp in self.lps:
                if lp.crashed:
                    continue
                last = max((ch.queue[-1][0] for ch in net.inbound[lp.lp_id] if ch.queue), default=0.0)
                lp.wait_until(last)
                self._deliver(lp, INF)

    def migrate(self, entry, now):
        src, dst = self.lps[entry.src], self.lps[entry.dst]
        if dst.crashed or src.crashed or entry.entity not in src.hosted or entry.entity in dst.hosted:
            log.info("aborting migration %s", entry)
            return now
        cut = (int(self.gvt), -1, -1, -1)
        for lp in (src, dst):
            lp.wait_until(now)
            if lp.lvt >= cut[0]:
                self.rollback(lp, cut)
        self._flush()
        eid = entry.entity
        orphans = {k: n for k, n in src.orphans.items() if k[1] == eid}
        for k in orphans:
            del src.orphans[k]
        src.hosted.discard(eid)
        src.last_key.pop(eid, None)
        arrive = self.transfer(eid, src, dst)
        for snap in src.snap_states:
            snap.pop(eid, None)
        # every later rollback targets GVT or above, so these fence off the
        # pre-migration history (an entity coming back must not re-run it)
        src.take_snapshot()
        dst.take_snapshot()
        dst.orphans.update(orphans)
        dst.wait_until(arrive)
        self.counters.migrations += 1
        self.gaia.executed(entry)  # type: ignore[union-attr]
        return arrive

    # -- main loop -----------------------------------------------------------
    def _quiescent(self) -> bool:
        end = self.end_time
        return self.network.pending() == 0 and all(
            lp.queue.min_time() > end for lp in self.lps if not lp.crashed
        )

    def loop(self) -> None:
        L = self.n_lps
        self.heap: list[tuple[float, int, int]] = []
        self.scheduled = [INF] * L
        for lp in self.lps:
            lp.take_snapshot()
            self._wake(lp.lp_id, 0.0)
            if lp.crash_at < INF:
                heapq.heappush(self.heap, (lp.crash_at, _CRASH, lp.lp_id))
        period = self.opts.gvt_period
        heapq.heappush(self.heap, (period, _GVT, -1))
        rt = self.gaia.round_ticks if self.gaia is not None else self.opts.window_ticks
        next_round = rt
        end = self.end_time
        while True:
            t, kind, i = heapq.heappop(self.heap)
            if kind == _GVT:
                if self._quiescent():
                    for lp in self.lps:
                        if not lp.crashed:
                            lp.wait_until(t)
                    self.gvt_round(t)
                    break
                gvt = self.gvt_round(t)
                if gvt >= next_round:
                    windows = self.close_windows(t)
                    if self.gaia is not None:
                        done = self.gaia_round(t, windows)
                        for lp in self.lps:
                            if not lp.crashed:
                                self._wake(lp.lp_id, max(lp.clock, done))
                    next_round = (int(gvt) // rt + 1) * rt
                heapq.heappush(self.heap, (t + period, _GVT, -1))
                continue
            lp = self.lps[i]
            if lp.crashed:
                continue
            if kind == _CRASH:
                lp.wait_until(t)
                self.crash_lp(lp)
                continue
            if t != self.scheduled[i]:
                continue
            self.scheduled[i] = INF
            lp.wait_until(t)
            self._deliver(lp, lp.clock)
            if lp.queue and lp.queue.min_time() <= end:
                if lp.clock >= lp.crash_at:
                    self.crash_lp(lp)
                    continue
                self.process_one(lp)
                self._wake(i, lp.clock)
            else:
                na = self.network.next_arrival(i)
                if na < INF:
                    self._wake(i, na)


