"""PHOLD-style token passing: the classic synthetic PDES workload.

Each entity starts with ``population`` tokens. A received token is forwarded
after a random delay in ``[lookahead, max_delay]`` to either the ring
successor or a uniformly chosen other entity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..core import Event
from .base import EntityState, Model, ModelConfigError
from .rng import CounterRNG

TOKEN = 1


@dataclass(eq=False)
class PholdState(EntityState):
    received: int = 0

    type_name = "phold"

    def fields(self) -> dict[str, Any]:
        return {"r": self.received}

    @classmethod
    def from_fields(cls, eid, rng, send_seq, f):
        return cls(eid, rng, send_seq, int(f["r"]))

    def clone(self) -> "PholdState":
        return PholdState(self.eid, self.rng.copy(), self.send_seq, self.received)


class PholdModel(Model):
    name = "phold"

    def __init__(
        self,
        n: int,
        population: int = 1,
        topology: str = "uniform",
        lookahead: int = 1,
        max_delay: int = 4,
    ) -> None:
        if n < 1:
            raise ModelConfigError(f"phold needs n >= 1, got {n}")
        if topology not in ("uniform", "ring"):
            raise ModelConfigError(f"phold: unknown topology {topology!r}")
        if topology == "uniform" and n < 2:
            raise ModelConfigError("phold: uniform topology needs n >= 2")
        if lookahead < 1 or max_delay < lookahead:
            raise ModelConfigError("phold: need 1 <= lookahead <= max_delay")
        if population < 0:
            raise ModelConfigError("phold: population must be >= 0")
        self.n = n
        self.population = population
        self.topology = topology
        self.lookahead = lookahead
        self.max_delay = max_delay

    @property
    def n_entities(self) -> int:
        return self.n

    def _delay(self, rng: CounterRNG) -> int:
        return rng.randint(self.lookahead, self.max_delay)

    def _next(self, st: PholdState) -> int:
        if self.topology == "ring":
            return (st.eid + 1) % self.n
        t = st.rng.randbelow(self.n - 1)
        return t + 1 if t >= st.eid else t

    def build(self, seed: int) -> tuple[list[EntityState], list[Event]]:
        states = [PholdState(v, CounterRNG.for_entity(seed, v)) for v in range(self.n)]
        events = [
            st.emit(st.eid, 0, self._delay(st.rng), TOKEN)
            for st in states
            for _ in range(self.population)
        ]
        return states, events  # type: ignore[return-value]

    def _handle(self, st: PholdState, e: Event, now: int) -> list[Event]:  # type: ignore[override]
        st.received += 1
        return [st.emit(self._next(st), now, now + self._delay(st.rng), TOKEN)]
