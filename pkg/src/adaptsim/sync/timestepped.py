"""Lock-step engine: windows of ``step`` ticks separated by global barriers.

Within the window [t0, t0 + step) every LP processes its own events in
canonical order. Anything emitted must land in a later window, so LPs never
need each other's output before the barrier, where all channels are drained.
Steps with no pending work anywhere are skipped.

This is also the engine that carries replication: replicas of an entity
process the same accepted events and the receiving side drops duplicates.
"""

from __future__ import annotations

import logging

from ..core import Event
from ..model.base import ContractError
from ..runtime import INF, LogicalProcess
from .base import Engine, EngineConfigError

log = logging.getLogger(__name__)


def step_window(t: int, step: int) -> tuple[int, int]:
    """The [t0, t1) window of size ``step`` containing tick ``t``."""
    t0 = (t // step) * step
    return t0, t0 + step


def barrier_time(lp_clocks: list[float], last_delivery: float, barrier_latency: float) -> float:
    """A barrier completes once every LP is done and every sent message has landed."""
    return max(max(lp_clocks, default=0.0), last_delivery) + barrier_latency


class TimeSteppedEngine(Engine):
    name = "timestepped"
    supports_replication = True

    def __init__(self, model, **kw) -> None:
        super().__init__(model, **kw)
        if self.opts.step < 1:
            raise EngineConfigError("step must be >= 1")
        self.barrier_latency = 2 * self.profile.max_latency if self.n_lps > 1 else 0.0

    # -- delivery with receiver-side dedup ------------------------------
    def _accept(self, lp: LogicalProcess, ev: Event) -> bool:
        rm = self.replica_mgr
        if rm is not None and not rm.ledgers[lp.lp_id].accept(ev.key):
            self.counters.dedup_drops += 1
            return False
        return True

    def enqueue_local(self, lp: LogicalProcess, ev: Event) -> None:
        if self._accept(lp, ev):
            super().enqueue_local(lp, ev)

    def _deliver_all(self, lp: LogicalProcess) -> None:
        for _, msg in self.network.deliver(lp.lp_id, INF):
            for ev in self.accept_remote(lp, msg):
                if self._accept(lp, ev):
                    lp.queue.enqueue(ev)

    # -- one window on one LP -------------------------------------------
    def _run_step(self, lp: LogicalProcess, t1: int, limit: int, done: dict) -> None:
        q = lp.queue
        while q and q.min_time() <= limit:
            if lp.clock >= lp.crash_at:
                return  # dead from here on; noticed at the barrier
            e = q.dequeue_min()
            for o in self.execute(lp, e):
                if o.recv_time < t1:
                    raise ContractError(
                        f"entity {o.source} emitted {o.id} for t={o.recv_time} inside the current step ending at {t1}"
                    )
                self.dispatch(lp, o)
            done[e.key] = e  # replicas process the same key; keep one

    # -- migrations and re-replication at the barrier --------------------
    def transfer(self, eid, src, dst, *, keep_source=False):
        arrive = super().transfer(eid, src, dst, keep_source=keep_source)
        if self.replica_mgr is not None:
            self.replica_mgr.ledgers[dst.lp_id].copy_entity(self.replica_mgr.ledgers[src.lp_id], eid)
        return arrive

    def _re_replicate(self, now: float) -> float:
        rm = self.replica_mgr
        assert rm is not None
        live = self.live_lps()
        plan = rm.re_replication_plan(live, dict(enumerate(self.directory.counts(self.n_lps))))
        done = now
        for eid, s, d in plan:
            src, dst = self.lps[s], self.lps[d]
            src.wait_until(now)
            done = max(done, self.transfer(eid, src, dst, keep_source=True))
            log.info("re-replicated entity %d from LP%d onto LP%d", eid, s, d)
        if plan:
            rm.sync_directory(self.directory)
            rm.record(done)
        return done

    # -- main loop --------------------------------------------------------
    def loop(self) -> None:
        S = self.opts.step
        end_time = self.end_time
        rt = self.gaia.round_ticks if self.gaia else self.opts.window_ticks
        next_round = rt
        now = 0.0
        rerep_due = False
        while True:
            live = [lp for lp in self.lps if not lp.crashed]
            gmin = min(lp.queue.min_time() for lp in live)
            if gmin > end_time:
                break
            t0, t1 = step_window(int(gmin), S)
            limit = min(t1 - 1, end_time)
            done: dict = {}
            for lp in live:
                lp.wait_until(now)
                self._run_step(lp, t1, limit, done)
            bar = barrier_time([lp.clock for lp in live], self.network.last_delivery(), self.barrier_latency)
            self.counters.barriers += 1
            for lp in live:
                self._deliver_all(lp)
            for lp in live:
                if lp.crash_at <= bar:
                    self.crash_lp(lp)  # raises when an entity is lost
                    rerep_due = self.re_replication
            self.commit(done.values())
            if self.replica_mgr is not None:
                for ledger in self.replica_mgr.ledgers:
                    ledger.prune(t1)
            if t1 >= next_round:
                windows = self.close_windows(bar)
                if self.gaia is not None:
                    bar = max(bar, self.gaia_round(bar, windows))
                next_round = (t1 // rt + 1) * rt
            if rerep_due:
                bar = max(bar, self._re_replicate(bar))
                rerep_due = False
            now = bar
        for lp in self.lps:
            if not lp.crashed:
                lp.wait_until(now)
