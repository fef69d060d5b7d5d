"""The reference engine: one event list, one clock, canonical order."""

from __future__ import annotations

from ..runtime import expand
from .base import Engine, EngineConfigError


class SequentialEngine(Engine):
    """Processes every event with recv_time <= end_time in event_order.

    This is the oracle every other engine is diffed against, so it stays as
    plain as possible: no routing, no channels, no migration.
    """

    name = "sequential"

    def __init__(self, model, **kw) -> None:
        if kw.get("n_lps", 1) != 1:
            raise EngineConfigError("the sequential engine runs on exactly one LP")
        if kw.get("gaia") is not None:
            raise EngineConfigError("the sequential engine does not migrate entities")
        super().__init__(model, **kw)

    def loop(self) -> None:
        lp = self.lps[0]
        q = lp.queue
        end = self.end_time
        committed = self.committed
        while q and q.min_time() <= end:
            e = q.dequeue_min()
            for o in self.execute(lp, e):
                for ev in expand(o):
                    self.counters.local_messages += 1
                    q.enqueue(ev)
            committed.append(e)
        self.counters.committed_events = len(committed)
