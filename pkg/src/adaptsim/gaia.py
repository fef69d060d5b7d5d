"""Adaptive entity migration: clustering, load balancing and consolidation.

At every round boundary (a safe point of the engine) the controller rotates
the per-entity communication windows, looks at the per-LP window stats and
emits a bounded migration plan. Engines execute the plan; nothing here
touches entity state.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from .core import Event, Group
from .metrics import LpWindow
from .model.rng import CounterRNG, stream_key
from .runtime import Directory

REASONS = ("clustering", "load", "consolidation", "forced")


@dataclass
class HeuristicParams:
    alpha: float = 0.7
    delta: float = 0.25
    window: int = 4
    residency: int = 2
    max_migrations_per_round: int | None = None  # None: max(1, N // 10)
    migration_cost_weight: float = 0.01  # message-equivalents per serialized byte
    remote_message_cost: float = 1.0
    busy_floor: float = 0.2  # an LP below this busy fraction is never a bottleneck
    shrink_load: float = 0.0  # consolidate when mean load is below this (0 disables)
    clustering: bool = True
    load_balancing: bool = True

    def __post_init__(self) -> None:
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0.5, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.window < 1 or self.residency < 0:
            raise ValueError("window must be >= 1 and residency >= 0")
        if self.max_migrations_per_round is not None and self.max_migrations_per_round < 0:
            raise ValueError("max_migrations_per_round must be >= 0")
        if self.migration_cost_weight < 0 or self.remote_message_cost < 0:
            raise ValueError("migration costs must be >= 0")

    def cap(self, n_entities: int) -> int:
        if self.max_migrations_per_round is not None:
            return self.max_migrations_per_round
        return max(1, n_entities // 10)


class PlanEntry(NamedTuple):
    entity: int
    src: int
    dst: int
    reason: str


class CommPattern:
    """Sliding window (last ``window`` rounds) of message counts per destination LP."""

    def __init__(self, window: int = 4) -> None:
        self.window = window
        self.current: dict[int, Counter[int]] = {}
        self.past: dict[int, deque[Counter[int]]] = {}

    def record(self, se: int, dest_lp: int, n: int = 1) -> None:
        c = self.current.get(se)
        if c is None:
            c = self.current[se] = Counter()
        c[dest_lp] += n

    def rotate(self) -> None:
        """Close the current round; the oldest round falls out of the window."""
        for se in set(self.past) | set(self.current):
            dq = self.past.get(se)
            if dq is None:
                dq = self.past[se] = deque(maxlen=self.window)
            dq.append(self.current.get(se, Counter()))
        self.current = {}

    def counts(self, se: int) -> Counter[int]:
        total: Counter[int] = Counter()
        for c in self.past.get(se, ()):
            total.update(c)
        return total

    def rounds(self, se: int) -> int:
        return len(self.past.get(se, ()))

    def forget(self, se: int) -> None:
        self.past.pop(se, None)
        self.current.pop(se, None)


def record_interaction(pattern: CommPattern, se: int, dest_lp: int) -> None:
    pattern.record(se, dest_lp)


def _argmax(c: Counter[int]) -> int:
    # ties broken by smaller LpId
    return min(c, key=lambda lp: (-c[lp], lp))


def evaluate_clustering(
    pattern: CommPattern,
    se: int,
    home: int,
    params: HeuristicParams,
    *,
    state_size: int = 0,
    round_no: int = 0,
    last_migrated: int | None = None,
) -> int | None:
    """Target LP for ``se`` if it talks mostly to one other LP, else None."""
    c = pattern.counts(se)
    total = sum(c.values())
    if total == 0:
        return None
    best = _argmax(c)
    if best == home or c[best] / total <= params.alpha:
        return None
    if last_migrated is not None and round_no - last_migrated < params.residency:
        return None
    benefit = (c[best] - c.get(home, 0)) * params.remote_message_cost
    if benefit <= params.migration_cost_weight * state_size:
        return None
    return best


def local_affinity(pattern: CommPattern, se: int, home: int) -> float:
    c = pattern.counts(se)
    total = sum(c.values())
    return c.get(home, 0) / total if total else 0.0


def _speed(w: LpWindow, nominal: float) -> float:
    return w.events / w.busy if w.busy > 0 and w.events > 0 else nominal


def evaluate_load(
    windows: dict[int, LpWindow],
    params: HeuristicParams,
    *,
    hosted: dict[int, list[int]],
    entity_events: dict[int, dict[int, int]] | None = None,
    affinity: Callable[[int, int], float] | None = None,
    eligible: Callable[[int], bool] | None = None,
    nominal_speed: dict[int, float] | None = None,
    cap: int | None = None,
) -> list[PlanEntry]:
    """Evictions from LPs whose busy fraction exceeds (1 + delta) x mean.

    SEs leave in order of increasing local affinity, each to the currently
    least-loaded LP (smallest index on ties), until the projected load of the
    overloaded LP is back under the threshold or the cap is reached.
    """
    if not windows:
        return []
    loads = {lp: w.load for lp, w in windows.items()}
    mean = sum(loads.values()) / len(loads)
    threshold = (1.0 + params.delta) * mean
    entity_events = entity_events or {}
    affinity = affinity or (lambda se, lp: 0.0)
    eligible = eligible or (lambda se: True)
    nominal_speed = nominal_speed or {}
    cap = len(hosted) * 1000 if cap is None else cap
    proj = dict(loads)
    plan: list[PlanEntry] = []
    for lp in sorted(loads, key=lambda l: (-loads[l], l)):
        if loads[lp] <= threshold or loads[lp] <= params.busy_floor:
            continue
        ev = entity_events.get(lp, {})
        cands = [se for se in hosted.get(lp, []) if ev.get(se, 0) > 0 and eligible(se)]
        cands.sort(key=lambda se: (affinity(se, lp), se))
        w_src = windows[lp]
        s_src = _speed(w_src, nominal_speed.get(lp, 1.0))
        for se in cands:
            if proj[lp] <= threshold or len(plan) >= cap:
                break
            dst = min((l for l in proj if l != lp), key=lambda l: (proj[l], l), default=None)
            if dst is None:
                break
            w_dst = windows[dst]
            n = ev[se]
            if w_src.length > 0:
                proj[lp] -= n / s_src / w_src.length
            if w_dst.length > 0:
                proj[dst] += n / _speed(w_dst, nominal_speed.get(dst, s_src)) / w_dst.length
            plan.append(PlanEntry(se, lp, dst, "load"))
        if len(plan) >= cap:
            break
    return plan


def is_light(windows: dict[int, LpWindow], params: HeuristicParams) -> bool:
    """Mean busy fraction below ``shrink_load`` (never, when shrinking is off)."""
    if params.shrink_load <= 0 or not windows:
        return False
    return sum(w.load for w in windows.values()) / len(windows) < params.shrink_load


def evaluate_consolidation(
    windows: dict[int, LpWindow],
    params: HeuristicParams,
    *,
    hosted: dict[int, list[int]],
    pattern: CommPattern,
    eligible: Callable[[int], bool] | None = None,
    cap: int,
) -> list[PlanEntry]:
    """Drain the emptiest LP when the whole run is too light to need parallelism."""
    if not is_light(windows, params):
        return []
    active = [lp for lp in windows if hosted.get(lp)]
    if len(active) < 2:
        return []
    eligible = eligible or (lambda se: True)
    # drain the LP with fewest entities; on ties the larger index goes first
    victim = min(active, key=lambda lp: (len(hosted[lp]), -lp))
    others = [lp for lp in active if lp != victim]
    counts = {lp: len(hosted[lp]) for lp in others}
    plan = []
    for se in sorted(hosted[victim]):
        if len(plan) >= cap:
            break
        if not eligible(se):
            continue
        c = pattern.counts(se)
        dst = min(others, key=lambda lp: (-c.get(lp, 0), -counts[lp], lp))
        plan.append(PlanEntry(se, victim, dst, "consolidation"))
    return plan


@dataclass
class MigrationPlan:
    entries: list[PlanEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: PlanEntry) -> bool:
        if entry.src == entry.dst or any(e.entity == entry.entity for e in self.entries):
            return False
        self.entries.append(entry)
        return True


class Gaia:
    """Round-based controller run by the coordinator.

    ``mode`` is ``heuristic`` (the normal adaptive policy) or ``random``
    (adversarial forced migrations, for transparency testing).
    """

    def __init__(
        self,
        params: HeuristicParams,
        n_entities: int,
        n_lps: int,
        *,
        mode: str = "heuristic",
        seed: int = 0,
        round_ticks: int = 10,
    ) -> None:
        if mode not in ("heuristic", "random"):
            raise ValueError(f"unknown gaia mode {mode!r}")
        if round_ticks < 1:
            raise ValueError("round_ticks must be >= 1")
        self.params = params
        self.n_entities = n_entities
        self.n_lps = n_lps
        self.mode = mode
        self.round_ticks = round_ticks
        self.pattern = CommPattern(params.window)
        self.last_migrated: dict[int, int] = {}
        self.round_no = 0
        self.log: list[tuple[int, int, int, int, str]] = []
        self._rng = CounterRNG(stream_key(seed, 0, salt=23))

    def observe(self, committed: Iterable[Event], directory: Directory) -> None:
        """Feed the round's committed sends into the communication windows."""
        rec = self.pattern.record
        homes = directory.homes
        for e in committed:
            s = e.id.sender
            t = e.target
            tgt = t.gid if isinstance(t, Group) else t
            if s != tgt:
                rec(s, homes[tgt][0])

    def plan(
        self,
        directory: Directory,
        windows: dict[int, LpWindow],
        *,
        state_size: Callable[[int], int],
        live: list[int],
        nominal_speed: dict[int, float] | None = None,
    ) -> MigrationPlan:
        self.pattern.rotate()
        self.round_no += 1
        cap = self.params.cap(self.n_entities)
        plan = MigrationPlan()
        if cap == 0 or len(live) < 2:
            return plan
        if self.mode == "random":
            return self._random_plan(directory, live, cap)
        p = self.params
        replicated = any(len(h) > 1 for h in directory.homes)
        hosted: dict[int, list[int]] = {lp: [] for lp in live}
        for e, h in enumerate(directory.homes):
            if h and h[0] in hosted:
                hosted[h[0]].append(e)

        def eligible(se: int) -> bool:
            last = self.last_migrated.get(se)
            return last is None or self.round_no - last >= p.residency

        def free_for(se: int, dst: int) -> bool:
            return dst not in directory.homes[se]

        win = {lp: windows[lp] for lp in live if lp in windows}
        if is_light(win, p):
            # too little work to need the LPs we have: shrinking is the only move,
            # and a drain saves nothing until the victim is empty, so no cap
            if sum(1 for lp in hosted if hosted[lp]) > 1:
                for entry in evaluate_consolidation(win, p, hosted=hosted, pattern=self.pattern,
                                                    eligible=eligible, cap=self.n_entities):
                    if free_for(entry.entity, entry.dst):
                        plan.add(entry)
            return plan
        if p.load_balancing:
            for entry in evaluate_load(
                win, p, hosted=hosted,
                entity_events={lp: getattr(w, "entity_events", {}) for lp, w in win.items()},
                affinity=lambda se, lp: local_affinity(self.pattern, se, lp),
                eligible=eligible, nominal_speed=nominal_speed, cap=cap,
            ):
                if free_for(entry.entity, entry.dst):
                    plan.add(entry)
        if p.clustering and len(plan) < cap:
            loads = {lp: w.load for lp, w in win.items()}
            mean = sum(loads.values()) / len(loads) if loads else 0.0
            overloaded = {lp for lp, v in loads.items() if v > (1 + p.delta) * mean and v > p.busy_floor}
            proposals = []
            for se, h in enumerate(directory.homes):
                if not h or any(e.entity == se for e in plan.entries):
                    continue
                home = h[0]
                if home not in hosted:
                    continue
                dst = evaluate_clustering(
                    self.pattern, se, home, p,
                    state_size=state_size(se), round_no=self.round_no, last_migrated=self.last_migrated.get(se),
                )
                if dst is None or dst in overloaded or dst not in hosted or not free_for(se, dst):
                    continue
                if replicated and dst in h:
                    continue
                c = self.pattern.counts(se)
                proposals.append((-c[dst] / sum(c.values()), se, home, dst))
            for _, se, home, dst in sorted(proposals):
                if len(plan) >= cap:
                    break
                plan.add(PlanEntry(se, home, dst, "clustering"))
        return plan

    def _random_plan(self, directory: Directory, live: list[int], cap: int) -> MigrationPlan:
        plan = MigrationPlan()
        cands = [e for e, h in enumerate(directory.homes) if h and h[0] in live]
        for se in self._rng.sample(cands, cap):
            h = directory.homes[se]
            src = h[0]
            options = [lp for lp in live if lp not in h]
            if not options:
                continue
            plan.add(PlanEntry(se, src, options[self._rng.randbelow(len(options))], "forced"))
        return plan

    def executed(self, entry: PlanEntry) -> None:
        self.last_migrated[entry.entity] = self.round_no
        self.log.append((self.round_no, entry.entity, entry.src, entry.dst, entry.reason))
