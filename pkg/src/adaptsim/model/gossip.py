"""Push gossip with per-rumor duplicate suppression."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..core import Event
from .base import EntityState, Model, ModelConfigError
from .graphs import Graph, generate_graph
from .rng import CounterRNG

ORIGINATE = 1
PUSH = 2

# rumor id = origin * RUMOR_STRIDE + per-origin counter
RUMOR_STRIDE = 1 << 20


def _rumor_bytes(r: int) -> bytes:
    return r.to_bytes(8, "big")


@dataclass(eq=False)
class GossipState(EntityState):
    neighbors: tuple[int, ...] = ()
    seen: set[int] = field(default_factory=set)
    originated: int = 0

    type_name = "gossip"

    @property
    def infected(self) -> bool:
        return bool(self.seen)

    def fields(self) -> dict[str, Any]:
        return {"nb": list(self.neighbors), "seen": sorted(self.seen), "orig": self.originated}

    @classmethod
    def from_fields(cls, eid, rng, send_seq, f):
        return cls(eid, rng, send_seq, tuple(f["nb"]), set(f["seen"]), int(f["orig"]))

    def clone(self) -> "GossipState":
        return GossipState(self.eid, self.rng.copy(), self.send_seq, self.neighbors, set(self.seen), self.originated)


class GossipModel(Model):
    """Rumors pushed to ``fanout`` random neighbours one tick after first receipt.

    Each origin entity starts a rumor at time 1 and, when ``rumor_period`` is
    positive, a fresh one every ``rumor_period`` ticks after that.
    """

    name = "gossip"
    lookahead = 1

    def __init__(
        self,
        n: int,
        graph: dict | None = None,
        fanout: int = 3,
        rumor_period: int = 0,
        origins: list[int] | None = None,
    ) -> None:
        if n < 2:
            raise ModelConfigError(f"gossip needs n >= 2, got {n}")
        if fanout < 1:
            raise ModelConfigError("gossip fanout must be >= 1")
        if rumor_period < 0:
            raise ModelConfigError("rumor_period must be >= 0")
        graph = dict(graph or {"kind": "scale_free", "m": 2})
        self.graph_kind = graph.pop("kind", "scale_free")
        self.graph_seed = int(graph.pop("seed", 0))
        self.graph_params = graph
        self.n = n
        self.fanout = fanout
        self.rumor_period = rumor_period
        self.origins = list(origins if origins is not None else [0])
        for o in self.origins:
            if not 0 <= o < n:
                raise ModelConfigError(f"gossip origin {o} outside [0, {n})")
        self._graph: Graph | None = None

    @property
    def n_entities(self) -> int:
        return self.n

    def graph(self, seed: int) -> Graph:
        return generate_graph(self.graph_kind, self.n, self.graph_params, seed ^ self.graph_seed)

    def build(self, seed: int) -> tuple[list[EntityState], list[Event]]:
        g = self.graph(seed)
        states: list[EntityState] = [
            GossipState(v, CounterRNG.for_entity(seed, v), 0, g.adjacency[v]) for v in range(self.n)
        ]
        events = []
        for o in sorted(set(self.origins)):
            states[o].seen.add(o * RUMOR_STRIDE)  # holds its first rumor from the start
            events.append(states[o].emit(o, 0, 1, ORIGINATE))
        return states, events

    def _push(self, st: GossipState, rumor: int, now: int) -> list[Event]:
        payload = _rumor_bytes(rumor)
        return [st.emit(t, now, now + 1, PUSH, payload) for t in st.rng.sample(list(st.neighbors), self.fanout)]

    def _handle(self, st: GossipState, e: Event, now: int) -> list[Event]:  # type: ignore[override]
        if e.kind == PUSH:
            rumor = int.from_bytes(e.payload, "big")
            if rumor in st.seen:
                return []
            st.seen.add(rumor)
            return self._push(st, rumor, now)
        if e.kind == ORIGINATE:
            rumor = st.eid * RUMOR_STRIDE + st.originated
            st.originated += 1
            st.seen.add(rumor)
            out = self._push(st, rumor, now)
            if self.rumor_period > 0:
                out.append(st.emit(st.eid, now, now + self.rumor_period, ORIGINATE))
            return out
        raise ModelConfigError(f"gossip: unknown event kind {e.kind}")
