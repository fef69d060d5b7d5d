"""Active replication of entities over distinct LPs with receiver-side dedup.

Replicas are deterministic, so every live replica of an entity emits the
same events with the same ids; a receiving LP accepts the first copy of each
``(event, target)`` and drops the rest. No agreement protocol is needed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .core import Event, SimError
from .runtime import Directory, RunFailure


class ReplicationConfigError(SimError):
    pass


class UnrecoverableEntityError(RunFailure):
    pass


@dataclass
class VseGroup:
    entity: int
    replicas: list[tuple[int, int]]  # (lp, replica index)
    live: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.live:
            self.live = [True] * len(self.replicas)
        lps = [lp for lp, _ in self.replicas]
        if len(set(lps)) != len(lps):
            raise ReplicationConfigError(f"entity {self.entity}: replica LPs must be distinct, got {lps}")

    @property
    def live_lps(self) -> list[int]:
        return [lp for (lp, _), ok in zip(self.replicas, self.live) if ok]

    @property
    def n_live(self) -> int:
        return sum(self.live)

    def mask(self, lp: int) -> bool:
        hit = False
        for i, (rlp, _) in enumerate(self.replicas):
            if rlp == lp and self.live[i]:
                self.live[i] = False
                hit = True
        return hit

    def add(self, lp: int) -> None:
        if lp in self.live_lps:
            raise ReplicationConfigError(f"entity {self.entity} already has a live replica on LP{lp}")
        self.replicas.append((lp, len(self.replicas)))
        self.live.append(True)

    def move(self, src: int, dst: int) -> None:
        for i, (rlp, idx) in enumerate(self.replicas):
            if rlp == src and self.live[i]:
                self.replicas[i] = (dst, idx)
                return
        raise ReplicationConfigError(f"entity {self.entity} has no live replica on LP{src}")


def place_replicas(n: int, r: int, n_lps: int, seed: int = 0, primary: list[int] | None = None) -> list[VseGroup]:
    """Replica 0 of entity e stays on primary(e); the others go, one by one,
    to the least-loaded LP not yet in the group (ties: the first LP after
    primary(e), cyclically).

    With a balanced primary placement (round robin by default) every LP
    ends up with the same number of replicas, give or take one.
    """
    if r < 1:
        raise ReplicationConfigError("replicas must be >= 1")
    if r > n_lps:
        raise ReplicationConfigError(f"replicas={r} exceeds the number of LPs ({n_lps})")
    primary = primary if primary is not None else [e % n_lps for e in range(n)]
    load = [0] * n_lps
    for p in primary:
        load[p] += 1
    groups = []
    for e in range(n):
        p = primary[e]
        lps = [p]
        for j in range(1, r):
            dst = min((lp for lp in range(n_lps) if lp not in lps), key=lambda lp: (load[lp], (lp - p) % n_lps))
            lps.append(dst)
            load[dst] += 1
        groups.append(VseGroup(e, [(lp, j) for j, lp in enumerate(lps)]))
    return groups


def replicate_route(e: Event, group: VseGroup) -> list[int]:
    """LPs that must receive a copy of ``e``: every live replica of its target."""
    lps = group.live_lps
    if not lps:
        raise UnrecoverableEntityError(f"entity {group.entity} has no live replica")
    return lps


class DedupLedger:
    """Per-LP set of accepted (event, target) keys, pruned below the frontier."""

    def __init__(self) -> None:
        self._by_time: dict[int, set[tuple[int, int, int, int]]] = defaultdict(set)
        self.drops = 0

    def accept(self, key: tuple[int, int, int, int]) -> bool:
        s = self._by_time[key[0]]
        if key in s:
            self.drops += 1
            return False
        s.add(key)
        return True

    def seen(self, key: tuple[int, int, int, int]) -> bool:
        return key in self._by_time.get(key[0], ())

    def prune(self, frontier: int) -> None:
        for t in [t for t in self._by_time if t < frontier]:
            del self._by_time[t]

    def copy_entity(self, other: "DedupLedger", entity: int) -> None:
        for t, keys in other._by_time.items():
            mine = self._by_time[t]
            mine.update(k for k in keys if k[1] == entity)

    def __len__(self) -> int:
        return sum(len(s) for s in self._by_time.values())


class ReplicaManager:
    def __init__(self, groups: list[VseGroup], n_lps: int, re_replication: bool = False) -> None:
        self.groups = groups
        self.n_lps = n_lps
        self.re_replication = re_replication
        self.target = max((len(g.replicas) for g in groups), default=1)
        self.ledgers = [DedupLedger() for _ in range(n_lps)]
        self.history: list[tuple[float, int]] = []

    def directory(self) -> Directory:
        return Directory([g.live_lps for g in self.groups])

    def sync_directory(self, directory: Directory) -> None:
        for g in self.groups:
            directory.homes[g.entity] = g.live_lps

    def min_live(self) -> int:
        return min((g.n_live for g in self.groups), default=0)

    def record(self, wct: float) -> None:
        self.history.append((wct, sum(g.n_live for g in self.groups)))

    def handle_lp_crash(self, lp: int, directory: Directory) -> list[int]:
        """Mask replicas on ``lp``; returns the entities that lost a replica."""
        hit = [g.entity for g in self.groups if g.mask(lp)]
        dead = [g.entity for g in self.groups if g.n_live == 0]
        self.sync_directory(directory)
        if dead:
            raise UnrecoverableEntityError(
                f"LP{lp} crash left {len(dead)} entities without a live replica (e.g. {dead[:5]})"
            )
        return hit

    def re_replication_plan(self, live_lps: list[int], load: dict[int, int]) -> list[tuple[int, int, int]]:
        """(entity, survivor LP, new LP) to bring groups back toward r live replicas."""
        if not self.re_replication:
            return []
        load = dict(load)
        plan = []
        for g in self.groups:
            missing = self.target - g.n_live
            for _ in range(missing):
                have = g.live_lps
                options = [lp for lp in live_lps if lp not in have]
                if not options or not have:
                    break
                dst = min(options, key=lambda lp: (load.get(lp, 0), lp))
                plan.append((g.entity, have[0], dst))
                g.add(dst)
                load[dst] = load.get(dst, 0) + 1
        return plan
