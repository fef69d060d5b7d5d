"""Machinery shared by all engines: setup, execution, commit, reports."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from ..core import Event, format_trace
from ..gaia import Gaia, PlanEntry
from ..metrics import Counters, LpWindow, PricingScheme, RunReport
from ..model.base import EntityState, Model, deserialize_state, serialize_state
from ..reliable import ReplicaManager, place_replicas
from ..runtime import (
    INF,
    Directory,
    EnvProfile,
    LogicalProcess,
    Network,
    RoutingError,
    RunFailure,
    expand,
    initial_placement,
    route,
)

log = logging.getLogger(__name__)


class EngineConfigError(ValueError):
    pass


@dataclass
class EngineOptions:
    step: int = 1
    lookahead: int | None = None
    null_policy: str = "on_block"  # CMB: only the on-block variant is implemented
    snapshot_every: int = 16
    gvt_period: float = 0.02
    window_ticks: int = 10  # stats window for engines with sim-time barriers
    bytes_per_event: int = 1024  # serialization cost: this many bytes ~ one event


@dataclass
class RunResult:
    trace: list[Event]
    report: RunReport
    directory: Directory | None = None
    gvt_history: list[tuple[float, int]] = field(default_factory=list)
    remote_keys: set[tuple[int, int, int, int]] = field(default_factory=set)
    final_states: dict[int, bytes] = field(default_factory=dict)

    def trace_text(self) -> str:
        return format_trace(self.trace)

    @property
    def ok(self) -> bool:
        return self.report.ok


class Engine:
    name = ""
    supports_replication = False

    def __init__(
        self,
        model: Model,
        *,
        seed: int = 0,
        end_time: int = 100,
        n_lps: int = 1,
        profile: EnvProfile | None = None,
        placement: str = "round_robin",
        explicit_placement: list[int] | None = None,
        gaia: Gaia | None = None,
        replicas: int = 1,
        re_replication: bool = False,
        pricing: PricingScheme | None = None,
        options: EngineOptions | None = None,
    ) -> None:
        if n_lps < 1:
            raise EngineConfigError("n_lps must be >= 1")
        if end_time < 0:
            raise EngineConfigError("end_time must be >= 0")
        self.model = model
        self.seed = seed
        self.end_time = end_time
        self.n_lps = n_lps
        self.profile = profile or EnvProfile.uniform(n_lps)
        if self.profile.n_lps != n_lps:
            raise EngineConfigError(f"env profile describes {self.profile.n_lps} LPs, run has {n_lps}")
        self.placement = placement
        self.explicit_placement = explicit_placement
        self.gaia = gaia
        self.replicas = replicas
        if replicas > 1 and not self.supports_replication:
            raise EngineConfigError(f"replication is only supported by the timestepped engine, not {self.name}")
        self.re_replication = re_replication
        self.pricing = pricing or PricingScheme()
        self.opts = options or EngineOptions()
        self.counters = Counters()
        self.committed: list[Event] = []
        self.round_committed: list[Event] = []
        self.failure = ""
        self.replica_mgr: ReplicaManager | None = None
        # last delivery path per (event, target): True when it crossed a channel
        self.delivery_mode: dict[tuple[int, int, int, int], bool] = {}

    # -- setup ---------------------------------------------------------
    def make_lp(self, i: int) -> LogicalProcess:
        return LogicalProcess(i, self.profile)

    def setup(self) -> None:
        states, events = self.model.build(self.seed)
        self.n_entities = len(states)
        placement = initial_placement(self.n_entities, self.n_lps, self.placement, self.seed, self.explicit_placement)
        if self.replicas > 1 or self.re_replication:
            groups = place_replicas(self.n_entities, self.replicas, self.n_lps, self.seed, placement)
            self.replica_mgr = ReplicaManager(groups, self.n_lps, self.re_replication)
            self.directory = self.replica_mgr.directory()
        else:
            self.directory = Directory.from_placement(placement)
        self.network = Network(self.profile, self.seed)
        self.lps = [self.make_lp(i) for i in range(self.n_lps)]
        for st in states:
            homes = self.directory.homes[st.eid]
            for j, lp in enumerate(homes):
                self.install(self.lps[lp], st if j == 0 else deserialize_state(serialize_state(st)))
        for e0 in events:
            for e in expand(e0):
                for lp in self.directory.lps_of(e.target_id):
                    self.bootstrap(self.lps[lp], e)
        if self.replica_mgr:
            self.replica_mgr.record(0.0)

    def install(self, lp: LogicalProcess, st: EntityState) -> None:
        lp.states[st.eid] = st

    def bootstrap(self, lp: LogicalProcess, e: Event) -> None:
        lp.queue.enqueue(e)
        if self.replica_mgr:
            self.replica_mgr.ledgers[lp.lp_id].accept(e.key)

    # -- execution -----------------------------------------------------
    def execute(self, lp: LogicalProcess, e: Event) -> list[Event]:
        st = lp.states[e.target]  # type: ignore[index]
        _, out = self.model.handle_event(st, e, e.recv_time)
        lp.charge(1, e.target)  # type: ignore[arg-type]
        self.counters.total_processed += 1
        return out

    def send(self, lp: LogicalProcess, dst: int, msg, *, counter: str = "remote_messages") -> float:
        """Put ``msg`` on the channel lp -> dst at the LP's current clock."""
        d = self.network.send(lp.lp_id, dst, msg, lp.clock)
        if d < INF:
            setattr(self.counters, counter, getattr(self.counters, counter) + 1)
            lp.win_sent += 1
        return d

    def dispatch(self, lp: LogicalProcess, o: Event) -> list[tuple[int, float]]:
        """Route one emitted event; returns (dst, deliver_wct) for each remote copy."""
        r = route(o, self.directory, lp.lp_id)
        for ev in r.local:
            self.counters.local_messages += 1
            self.enqueue_local(lp, ev)
        sent = []
        for dst, ev in r.remote:
            sent.append((dst, self.send(lp, dst, ev)))
        return sent

    def enqueue_local(self, lp: LogicalProcess, ev: Event) -> None:
        self.delivery_mode[ev.key] = False
        lp.queue.enqueue(ev)

    def accept_remote(self, lp: LogicalProcess, msg: Event) -> list[Event]:
        """Expand an arriving copy; returns the per-entity events hosted here."""
        lp.win_recv += 1
        out = []
        for ev in expand(msg):
            if ev.target not in lp.states:
                self.forward(lp, ev)
                continue
            self.delivery_mode[ev.key] = True
            out.append(ev)
        return out

    def forward(self, lp: LogicalProcess, ev: Event) -> float:
        home = self.directory.home(ev.target)  # type: ignore[arg-type]
        if home == lp.lp_id:
            raise RoutingError(f"LP{lp.lp_id} does not host entity {ev.target} but the directory says it does")
        return self.send(lp, home, ev, counter="forwarded_messages")

    def commit(self, events: Iterable[Event]) -> None:
        batch = sorted(events, key=lambda e: e.key)
        self.committed.extend(batch)
        self.round_committed.extend(batch)
        self.counters.committed_events += len(batch)

    def live_lps(self) -> list[int]:
        return [lp.lp_id for lp in self.lps if not lp.crashed]

    # -- crashes -------------------------------------------------------
    def crash_lp(self, lp: LogicalProcess) -> None:
        """Kill ``lp``; fatal unless every entity it hosts survives elsewhere."""
        if lp.crashed:
            return
        lp.crashed = True
        self.network.mark_crashed(lp.lp_id)
        log.info("LP%d crashed at wct %.6f", lp.lp_id, lp.crash_at)
        if self.replica_mgr is not None:
            self.replica_mgr.handle_lp_crash(lp.lp_id, self.directory)
            self.replica_mgr.record(lp.crash_at)
            return
        if lp.states:
            raise RunFailure(f"LP{lp.lp_id} crashed at wct {lp.crash_at:.6g} hosting {len(lp.states)} entities")

    # -- migration -----------------------------------------------------
    def state_size(self, eid: int) -> int:
        lp = self.lps[self.directory.home(eid)]
        st = lp.states.get(eid)
        return len(serialize_state(st)) if st is not None else 0

    def transfer(self, eid: int, src: LogicalProcess, dst: LogicalProcess, *, keep_source: bool = False) -> float:
        """Move (or copy) one entity with its pending events; returns the arrival wct."""
        st = src.states[eid] if keep_source else src.states.pop(eid)
        blob = serialize_state(st)
        src.charge_time(len(blob) / self.opts.bytes_per_event / self.profile.effective_speed(src.lp_id, src.clock))
        if keep_source:
            pending = [e for e in src.queue if e.target == eid]
        else:
            pending = src.queue.pop_where(lambda e: e.target == eid)
        base, _ = self.profile.latency_of(src.lp_id, dst.lp_id)
        arrive = src.clock + base
        self.counters.migration_messages += 1
        self.install(dst, deserialize_state(blob))
        for e in pending:
            self.receive_transferred(dst, e)
        if not keep_source:
            self.directory.move(eid, src.lp_id, dst.lp_id)
            if self.replica_mgr is not None:
                self.replica_mgr.groups[eid].move(src.lp_id, dst.lp_id)
        return arrive

    def receive_transferred(self, dst: LogicalProcess, e: Event) -> None:
        dst.queue.enqueue(e)

    def gaia_round(self, now: float, windows: dict[int, LpWindow]) -> float:
        """Evaluate and execute one round of migrations; returns when the handover ends."""
        g = self.gaia
        assert g is not None
        g.observe(self.round_committed, self.directory)
        self.round_committed = []
        live = self.live_lps()
        plan = g.plan(
            self.directory, windows, state_size=self.state_size, live=live,
            nominal_speed={i: self.profile.speeds[i] for i in live},
        )
        done = now
        for entry in plan:
            done = max(done, self.migrate(entry, now))
        return done

    def migrate(self, entry: PlanEntry, now: float) -> float:
        src, dst = self.lps[entry.src], self.lps[entry.dst]
        if dst.crashed or src.crashed or entry.entity not in src.states or entry.entity in dst.states:
            log.info("aborting migration %s", entry)
            return now
        src.wait_until(now)
        arrive = self.transfer(entry.entity, src, dst)
        self.counters.migrations += 1
        self.gaia.executed(entry)  # type: ignore[union-attr]
        return arrive

    # -- reporting -----------------------------------------------------
    def close_windows(self, now: float) -> dict[int, LpWindow]:
        return {lp.lp_id: lp.close_window(now) for lp in self.lps if not lp.crashed}

    def wct(self) -> float:
        return max((lp.clock for lp in self.lps if not lp.crashed), default=0.0)

    def build_report(self, wct: float) -> RunReport:
        for lp in self.lps:
            if not lp.crashed:
                lp.wait_until(wct)
                lp.close_window(wct)
        windows = sorted((w for lp in self.lps for w in lp.windows), key=lambda w: (w.window, w.lp))
        allocated = [min(wct, lp.crash_at) if lp.crashed else wct for lp in self.lps]
        return RunReport(
            engine=self.name,
            n_lps=self.n_lps,
            wct=wct,
            counters=self.counters,
            lp_busy=[lp.busy_total for lp in self.lps],
            lp_idle=[lp.idle_total for lp in self.lps],
            lp_allocated=allocated,
            windows=windows,
            migration_log=list(self.gaia.log) if self.gaia else [],
            live_replicas=list(self.replica_mgr.history) if self.replica_mgr else [],
            status="failed" if self.failure else "ok",
            failure=self.failure,
            pricing=self.pricing,
        )

    def final_states(self) -> dict[int, bytes]:
        out: dict[int, bytes] = {}
        for lp in self.lps:
            if lp.crashed:
                continue
            for eid, st in lp.states.items():
                out.setdefault(eid, serialize_state(st))
        return out

    def run(self) -> RunResult:
        self.setup()
        try:
            self.loop()
        except RunFailure as exc:
            self.failure = str(exc)
            log.warning("run failed: %s", exc)
        wct = self.wct()
        report = self.build_report(wct)
        return RunResult(
            trace=sorted(self.committed, key=lambda e: e.key),
            report=report,
            directory=self.directory,
            gvt_history=getattr(self, "gvt_history", []),
            remote_keys={k for k, remote in self.delivery_mode.items() if remote},
            final_states=self.final_states() if not self.failure else {},
        )

    def loop(self) -> None:
        raise NotImplementedError


__all__ = ["INF", "Engine", "EngineConfigError", "EngineOptions", "RunResult"]
