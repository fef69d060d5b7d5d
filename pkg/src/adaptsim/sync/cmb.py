"""Conservative engine: Chandy-Misra-Bryant with on-block null messages.

Each channel message carries a promise ``p``: every later message on that
channel has a timestamp strictly above ``p``. An LP's safe bound is the
minimum promise over its input channels, and it may process any event with
``recv_time <= bound``. After a batch the LP has completed everything up to
``lvt`` and promises ``lvt + lookahead`` to its neighbours, sending a null
wherever that improves on what it already promised.

With GAIA on, rounds sit at multiples of ``round_ticks``: LPs are capped at
the round end, and once all of them reach it the coordinator drains the
channels, migrates and releases them.
"""

from __future__ import annotations

import heapq
import logging
from typing import NamedTuple

from ..core import CausalityError, Event, SimError
from ..runtime import INF, LogicalProcess, route
from .base import Engine, EngineConfigError

log = logging.getLogger(__name__)

_CRASH, _WAKE = 0, 1


class CmbMsg(NamedTuple):
    promise: int
    event: Event | None  # None for a null message


class DeadlockError(SimError):
    pass


def cmb_safe_bound(clocks, local_queue_min: float | None = None) -> float:
    """Min over input channel clocks; +inf with no inputs (a single-LP run).

    ``local_queue_min`` is accepted for symmetry with the textbook signature;
    the bound itself does not depend on it.
    """
    return min(clocks, default=INF)


def null_timestamp(lvt: int, lookahead: int) -> int:
    if lookahead <= 0:
        raise EngineConfigError("lookahead must be > 0")
    return lvt + lookahead


class CmbEngine(Engine):
    name = "cmb"

    def __init__(self, model, **kw) -> None:
        super().__init__(model, **kw)
        la = self.opts.lookahead if self.opts.lookahead is not None else model.lookahead
        if la is None or la <= 0:
            raise EngineConfigError("lookahead must be > 0 for the cmb engine")
        self.lookahead = int(la)
        if self.opts.null_policy != "on_block":
            raise EngineConfigError(f"null_policy {self.opts.null_policy!r} is not implemented; use 'on_block'")
        self.barrier_latency = 2 * self.profile.max_latency if self.n_lps > 1 else 0.0

    def setup(self) -> None:
        super().setup()
        L = self.n_lps
        self.lvt = [0] * L
        self.in_clock: list[dict[int, int]] = [{s: 0 for s in range(L) if s != d} for d in range(L)]
        self.out_promise = [[-1] * L for _ in range(L)]
        self.heap: list[tuple[float, int, int]] = []
        self.next_window = [self.opts.window_ticks] * L

    # -- channel protocol -------------------------------------------------
    def _post(self, lp: LogicalProcess, dst: int, msg: CmbMsg, counter: str) -> None:
        d = self.send(lp, dst, msg, counter=counter)
        if d < INF:
            self.out_promise[lp.lp_id][dst] = msg.promise
            heapq.heappush(self.heap, (d, _WAKE, dst))

    def emit_nulls(self, lp: LogicalProcess) -> int:
        """Send ``lvt + lookahead`` on every output channel where it is news."""
        i = lp.lp_id
        p = null_timestamp(self.lvt[i], self.lookahead)
        sent = 0
        for dst in range(self.n_lps):
            if dst != i and not self.lps[dst].crashed and p > self.out_promise[i][dst]:
                self._post(lp, dst, CmbMsg(p, None), "null_messages")
                sent += 1
        return sent

    def _receive(self, lp: LogicalProcess, src: int, msg: CmbMsg) -> None:
        clocks = self.in_clock[lp.lp_id]
        if src in clocks and msg.promise > clocks[src]:
            clocks[src] = msg.promise
        if msg.event is not None:
            for ev in self.accept_remote(lp, msg.event):
                lp.queue.enqueue(ev)

    def dispatch(self, lp: LogicalProcess, o: Event, now: int = 0):  # type: ignore[override]
        r = route(o, self.directory, lp.lp_id)
        for ev in r.local:
            self.counters.local_messages += 1
            self.enqueue_local(lp, ev)
        i = lp.lp_id
        for dst, ev in r.remote:
            p = max(self.out_promise[i][dst], now - 1 + self.lookahead)
            self._post(lp, dst, CmbMsg(p, ev), "remote_messages")

    # -- one activation -------------------------------------------------
    def _cap(self) -> int:
        return min(self.end_time, self.round_end)

    def _activate(self, lp: LogicalProcess, t: float) -> None:
        i = lp.lp_id
        lp.wait_until(t)
        for src, msg in self.network.deliver(i, lp.clock):
            self._receive(lp, src, msg)
        bound = cmb_safe_bound(self.in_clock[i].values())
        cap = self._cap()
        limit = min(bound, cap)
        q = lp.queue
        la = self.lookahead
        while q and q.min_time() <= limit:
            if lp.clock >= lp.crash_at:
                self._crash(lp)
                return
            e = q.dequeue_min()
            now = e.recv_time
            if now > bound:
                self.counters.unsafe_processings += 1
            for o in self.execute(lp, e):
                if o.recv_time < now + la:
                    raise CausalityError(
                        f"entity {o.source} emitted {o.id} at {o.recv_time} < now {now} + lookahead {la}"
                    )
                self.dispatch(lp, o, now)
            self.committed.append(e)
            self.round_committed.append(e)
        new = min(q.min_time() - 1, bound, cap)
        if new > self.lvt[i]:
            self.lvt[i] = int(new)
        self.emit_nulls(lp)
        if self.gaia is None:
            while self.lvt[i] >= self.next_window[i]:
                lp.close_window(lp.clock)
                self.next_window[i] += self.opts.window_ticks

    def _crash(self, lp: LogicalProcess) -> None:
        self.crash_lp(lp)  # fatal if it hosted entities
        for clocks in self.in_clock:
            clocks.pop(lp.lp_id, None)
        # a vanished input may unblock the others
        for other in self.lps:
            if not other.crashed:
                heapq.heappush(self.heap, (max(other.clock, lp.crash_at), _WAKE, other.lp_id))

    def _round_barrier(self) -> None:
        live = [lp for lp in self.lps if not lp.crashed]
        bar = max(max(lp.clock for lp in live), self.network.last_delivery()) + self.barrier_latency
        for lp in live:
            for src, msg in self.network.deliver(lp.lp_id, INF):
                self._receive(lp, src, msg)
        self.counters.barriers += 1
        windows = self.close_windows(bar)
        done = self.gaia_round(bar, windows) if self.gaia is not None else bar
        self.round_end += self.gaia.round_ticks  # type: ignore[union-attr]
        for lp in live:
            lp.wait_until(done)
            heapq.heappush(self.heap, (done, _WAKE, lp.lp_id))

    def loop(self) -> None:
        self.round_end = self.gaia.round_ticks if self.gaia is not None else INF
        heap = self.heap
        for lp in self.lps:
            self.emit_nulls(lp)  # bootstrap promises
            heapq.heappush(heap, (0.0, _WAKE, lp.lp_id))
            if lp.crash_at < INF:
                heapq.heappush(heap, (lp.crash_at, _CRASH, lp.lp_id))
        while True:
            cap = self._cap()
            if all(self.lvt[lp.lp_id] >= cap for lp in self.lps if not lp.crashed):
                if cap >= self.end_time:
                    break
                self._round_barrier()
                continue
            if not heap:
                stuck = {lp.lp_id: self.lvt[lp.lp_id] for lp in self.lps if not lp.crashed}
                raise DeadlockError(f"no LP can make progress; lvts {stuck}, cap {cap}")
            t, kind, i = heapq.heappop(heap)
            lp = self.lps[i]
            if lp.crashed:
                continue
            if kind == _CRASH:
                lp.wait_until(t)
                self._crash(lp)
            else:
                self._activate(lp, t)
        self.counters.committed_events = len(self.committed)
